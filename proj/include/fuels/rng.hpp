#pragma once

#include <cfloat>
#include <cmath>
#include <cstdint>
#include <random>

#include "fuels/error.hpp"

// Deterministic random streams. Every consumer of randomness derives its own
// stream from (master seed, purpose, ids...) so results do not depend on
// call order or thread scheduling. Distribution transforms are hand-rolled
// because the std:: distributions are not bit-reproducible across standard
// library implementations; mt19937_64 itself is fully specified.

namespace fuels::rng {

// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream purposes. Distinct constants keep e.g. model init and client
// selection decorrelated even for equal id tuples.
constexpr std::uint64_t kModelInit = 0x01;
constexpr std::uint64_t kSelection = 0x02;
constexpr std::uint64_t kPrivacyNoise = 0x03;
constexpr std::uint64_t kSynthetic = 0x04;

class Stream {
public:
    explicit Stream(std::uint64_t seed) : eng_(mix(seed)) {}

    std::uint64_t bits() { return eng_(); }

    // Uniform in [0, 1) with 53 random mantissa bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, one variate per call.
    double gaussian(double stddev = 1.0) {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Laplace with the given standard deviation (scale b = stddev / sqrt(2)).
    double laplace(double stddev) {
        double b = stddev / std::sqrt(2.0);
        double u = uniform() - 0.5;
        double t = 1.0 - 2.0 * std::fabs(u);
        if (t < DBL_MIN) t = DBL_MIN;
        return (u < 0 ? b : -b) * std::log(t);
    }

    // Exponential with rate lambda (mean 1/lambda).
    double exponential(double rate) {
        if (rate <= 0.0) throw DomainError("exponential noise requires rate > 0");
        return -std::log(1.0 - uniform()) / rate;
    }

private:
    std::mt19937_64 eng_;
};

// Derives a child seed; used wherever an id tuple selects a stream.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = mix(seed);
    s = mix(s ^ mix(a));
    s = mix(s ^ mix(b));
    return mix(s ^ mix(c));
}

inline Stream make_stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = mix(seed);
    s = mix(s ^ purpose);
    s = mix(s ^ a);
    s = mix(s ^ b);
    return Stream(s);
}

}  // namespace fuels::rng
