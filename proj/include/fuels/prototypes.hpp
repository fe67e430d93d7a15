#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "fuels/error.hpp"
#include "fuels/rng.hpp"
#include "fuels/tensor.hpp"

// Client-level prototypes: the sole uplink payload. Periodicity-aware
// prototypes average batch representations element-wise (B x d_r);
// the concatenation-based variant stacks them (|D_n| x d_r). The server
// compares prototypes through softmax-flattened categorical distributions
// under the Jensen-Shannon divergence.

namespace fuels::proto {

struct Prototype {
    int client_id = -1;
    std::size_t round = 0;
    Tensor mat;

    bool is_sentinel() const { return mat.empty() || mat.all_zero(); }
};

namespace detail {

// Pairwise tree sum keeps the average order-invariant to ~1e-12.
inline Tensor pairwise_sum(const std::vector<Tensor>& ts, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return ts[lo];
    std::size_t mid = lo + (hi - lo) / 2;
    Tensor a = pairwise_sum(ts, lo, mid);
    Tensor b = pairwise_sum(ts, mid, hi);
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
    return a;
}

}  // namespace detail

// R_n = AVG over per-batch representations (all B x d_r).
inline Tensor periodicity_prototype(const std::vector<Tensor>& reprs) {
    if (reprs.empty()) throw ValidationError("periodicity_prototype: no batch representations");
    for (const Tensor& r : reprs)
        if (!r.same_shape(reprs.front())) throw DimensionError("periodicity_prototype: inconsistent shapes");
    Tensor sum = detail::pairwise_sum(reprs, 0, reprs.size());
    for (double& v : sum.data) v /= static_cast<double>(reprs.size());
    return sum;
}

// Concatenation-based prototype: batches stacked in order, first batch first.
inline Tensor concat_prototype(const std::vector<Tensor>& reprs) {
    if (reprs.empty()) throw ValidationError("concat_prototype: no batch representations");
    std::size_t cols = reprs.front().cols;
    std::size_t rows = 0;
    for (const Tensor& r : reprs) {
        if (r.cols != cols) throw DimensionError("concat_prototype: inconsistent widths");
        rows += r.rows;
    }
    Tensor out(rows, cols);
    std::size_t at = 0;
    for (const Tensor& r : reprs) {
        std::copy(r.data.begin(), r.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(at));
        at += r.size();
    }
    return out;
}

// Softmax over the flattened matrix. Shift-invariant by construction and
// well-defined for any finite prototype.
inline std::vector<double> prototype_to_distribution(const Tensor& prototype) {
    if (prototype.size() == 0) throw ValidationError("prototype_to_distribution: empty prototype");
    if (!prototype.finite()) throw DomainError("prototype_to_distribution: non-finite prototype");
    double mx = prototype.data[0];
    for (double v : prototype.data) mx = std::max(mx, v);
    std::vector<double> dist(prototype.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        dist[i] = std::exp(prototype.data[i] - mx);
        sum += dist[i];
    }
    for (double& v : dist) v /= sum;
    return dist;
}

// JS(P||Q) = KL(P||M)/2 + KL(Q||M)/2 with M = (P+Q)/2, natural log.
// Symmetric in its arguments bit-for-bit; range [0, ln 2].
inline double jsd(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw DimensionError("jsd: distribution lengths differ");
    auto check = [](const std::vector<double>& d) {
        double s = 0.0;
        for (double v : d) {
            if (v < 0.0 || !std::isfinite(v)) throw ContractError("jsd: input is not a distribution");
            s += v;
        }
        if (std::fabs(s - 1.0) > 1e-9) throw ContractError("jsd: input not normalized");
    };
    check(p);
    check(q);
    double kl_p = 0.0, kl_q = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) kl_p += p[i] * std::log(p[i] / m);
        if (q[i] > 0.0) kl_q += q[i] * std::log(q[i] / m);
    }
    return 0.5 * kl_p + 0.5 * kl_q;
}

inline double jsd(const Tensor& a, const Tensor& b) {
    return jsd(prototype_to_distribution(a), prototype_to_distribution(b));
}

enum class NoiseKind { kLaplace, kGaussian, kExponential };

inline NoiseKind noise_kind_from(const std::string& name) {
    if (name == "laplace") return NoiseKind::kLaplace;
    if (name == "gaussian") return NoiseKind::kGaussian;
    if (name == "exponential") return NoiseKind::kExponential;
    throw ValidationError("unknown noise kind: '" + name + "'");
}

inline const char* noise_kind_name(NoiseKind k) {
    switch (k) {
        case NoiseKind::kLaplace: return "laplace";
        case NoiseKind::kGaussian: return "gaussian";
        default: return "exponential";
    }
}

// Element-wise independent noise; laplace/gaussian use scale as the standard
// deviation (mean 0), exponential uses scale as the rate. scale = 0 is the
// degenerate no-noise case for every kind.
inline Tensor add_privacy_noise(const Tensor& prototype, NoiseKind kind, double scale, std::uint64_t seed) {
    if (scale < 0.0) throw ValidationError("add_privacy_noise: scale must be >= 0");
    Tensor out = prototype;
    if (scale == 0.0) return out;
    auto rng = rng::make_stream(seed, rng::kPrivacyNoise);
    for (double& v : out.data) {
        switch (kind) {
            case NoiseKind::kLaplace: v += rng.laplace(scale); break;
            case NoiseKind::kGaussian: v += rng.gaussian(scale); break;
            case NoiseKind::kExponential: v += rng.exponential(scale); break;
        }
    }
    return out;
}

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("prototype stream truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline void put_f64(std::ostream& os, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(b, 8);
}

inline double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw IoError("prototype stream truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace detail

// Wire format: client-id, round, rows (B), cols (d_r) as little-endian
// uint32, then rows*cols little-endian IEEE-754 doubles in row-major order.
inline void write_prototype(std::ostream& os, const Prototype& p) {
    detail::put_u32(os, static_cast<std::uint32_t>(p.client_id));
    detail::put_u32(os, static_cast<std::uint32_t>(p.round));
    detail::put_u32(os, static_cast<std::uint32_t>(p.mat.rows));
    detail::put_u32(os, static_cast<std::uint32_t>(p.mat.cols));
    for (double v : p.mat.data) detail::put_f64(os, v);
    if (!os) throw IoError("prototype write failed");
}

inline Prototype read_prototype(std::istream& is) {
    Prototype p;
    p.client_id = static_cast<int>(detail::get_u32(is));
    p.round = detail::get_u32(is);
    std::size_t rows = detail::get_u32(is);
    std::size_t cols = detail::get_u32(is);
    p.mat = Tensor(rows, cols);
    for (double& v : p.mat.data) v = detail::get_f64(is);
    return p;
}

}  // namespace fuels::proto
