#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fuels/error.hpp"
#include "fuels/rng.hpp"
#include "fuels/tensor.hpp"

// Sliding-window sample construction, temporal-shift augmentation, synthetic
// heterogeneous traffic generation, CSV ingestion, z-score normalization and
// batching. All pure functions over immutable inputs.

namespace fuels::data {

struct TrafficSeries {
    int client_id = 0;
    std::vector<double> values;  // v^1 .. v^K, one per time stamp
    std::size_t period = 1;      // time stamps per cycle
};

// One input-output pair: cv holds the c most recent values, pv holds q
// values sampled one period apart, y is the value to predict.
struct Sample {
    std::vector<double> cv;
    std::vector<double> pv;
    double y = 0.0;
};

struct Batch {
    Tensor cv;       // B x c
    Tensor pv;       // B x q
    Tensor targets;  // B x 1
};

struct NormStats {
    double mean = 0.0;
    double stddev = 1.0;
};

// Raw and temporally shifted samples, paired index-by-index.
struct AlignedSamples {
    std::vector<Sample> raw;
    std::vector<Sample> augmented;
};

namespace detail {

// Sample at prediction index k (1-based), windows shifted back by s.
inline Sample window_at(const std::vector<double>& v, std::size_t k, std::size_t c, std::size_t q, std::size_t p,
                        std::size_t s) {
    Sample smp;
    smp.cv.resize(c);
    smp.pv.resize(q);
    for (std::size_t j = 0; j < c; ++j) smp.cv[j] = v[k - c + j - s - 1];
    for (std::size_t j = 0; j < q; ++j) smp.pv[j] = v[k - (q - j) * p - s - 1];
    smp.y = v[k - 1];
    return smp;
}

}  // namespace detail

// One sample per valid k in [max(c, q*p) + s + 1, K]. With s = 0 this is the
// plain sliding-window dataset.
inline std::vector<Sample> make_windows(const TrafficSeries& series, std::size_t c, std::size_t q, std::size_t p,
                                        std::size_t shift = 0) {
    if (c < 1 || q < 1 || p < 1) throw ValidationError("make_windows: c, q, p must be >= 1");
    std::size_t K = series.values.size();
    std::size_t history = std::max(c, q * p) + shift;
    if (K <= history)
        throw ValidationError("make_windows: series too short for the requested windows (client " +
                              std::to_string(series.client_id) + ")");
    std::vector<Sample> out;
    out.reserve(K - history);
    for (std::size_t k = history + 1; k <= K; ++k) out.push_back(detail::window_at(series.values, k, c, q, p, 0));
    return out;
}

// Builds the raw dataset and its temporally shifted twin. Positions lacking
// history for the shifted windows are dropped from both sides so the two
// stay index-aligned; targets are shared.
inline AlignedSamples augment_temporal_shift(const TrafficSeries& series, std::size_t c, std::size_t q, std::size_t p,
                                             std::size_t shift) {
    AlignedSamples out;
    std::size_t K = series.values.size();
    std::size_t history = std::max(c, q * p) + shift;
    if (K <= history)
        throw ValidationError("augment_temporal_shift: shift leaves no samples (client " +
                              std::to_string(series.client_id) + ")");
    out.raw.reserve(K - history);
    out.augmented.reserve(K - history);
    for (std::size_t k = history + 1; k <= K; ++k) {
        out.raw.push_back(detail::window_at(series.values, k, c, q, p, 0));
        out.augmented.push_back(detail::window_at(series.values, k, c, q, p, shift));
    }
    return out;
}

// Synthetic heterogeneous traffic: client i in cluster g = i mod clusters gets
//   v^k = a_g sin(2 pi k / p + phi_g) + b_g sin(2 pi k / (7 p)) + c_i + eps.
// Clusters separate in daily phase/amplitude and, strongly, in the weekly
// amplitude: whether slow drift is signal or noise differs per cluster, so
// the optimal prediction maps conflict. The per-client offset and seeded
// noise individualize members.
inline std::vector<TrafficSeries> generate_synthetic(std::size_t n_clients, std::size_t clusters, std::size_t K,
                                                     std::size_t p, std::uint64_t seed, double noise_std = 0.05,
                                                     double offset_range = 0.25) {
    if (clusters < 1) throw ValidationError("generate_synthetic: clusters must be >= 1");
    if (n_clients < clusters) throw ValidationError("generate_synthetic: need at least one client per cluster");
    constexpr double two_pi = 6.283185307179586476925287;
    std::vector<TrafficSeries> out(n_clients);
    for (std::size_t i = 0; i < n_clients; ++i) {
        std::size_t g = i % clusters;
        double spread = clusters > 1 ? static_cast<double>(g) / static_cast<double>(clusters - 1) : 0.0;
        double amp = 1.0 + 0.5 * static_cast<double>(g);
        double phase = two_pi * static_cast<double>(g) / static_cast<double>(clusters);
        double weekly = 0.8 * spread;
        auto rng = rng::make_stream(seed, rng::kSynthetic, i);
        double offset = rng.uniform(-offset_range, offset_range);
        TrafficSeries s;
        s.client_id = static_cast<int>(i);
        s.period = p;
        s.values.resize(K);
        for (std::size_t k = 1; k <= K; ++k) {
            double t = static_cast<double>(k);
            double v = amp * std::sin(two_pi * t / static_cast<double>(p) + phase) +
                       weekly * std::sin(two_pi * t / (7.0 * static_cast<double>(p))) + offset;
            if (noise_std > 0.0) v += rng.gaussian(noise_std);
            s.values[k - 1] = v;
        }
        out[i] = std::move(s);
    }
    return out;
}

// Per-client z-score fitted on the training prefix of the series (the first
// ceil(train_fraction * K) values). Returns the fitted stats; the series is
// normalized in place.
inline NormStats normalize(TrafficSeries& series, double train_fraction = 0.8) {
    std::size_t K = series.values.size();
    if (K == 0) throw ValidationError("normalize: empty series");
    auto n = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(K)));
    n = std::min(std::max<std::size_t>(n, 1), K);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += series.values[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = series.values[i] - mean;
        var += d * d;
    }
    double stddev = std::sqrt(var / static_cast<double>(n));
    // A spread at rounding-noise level means the series is constant.
    if (stddev <= 1e-12 * std::max(1.0, std::fabs(mean)))
        throw ValidationError("normalize: constant series (client " + std::to_string(series.client_id) + ")");
    for (double& v : series.values) v = (v - mean) / stddev;
    return {mean, stddev};
}

inline double denormalize(double value, const NormStats& stats) { return value * stats.stddev + stats.mean; }

// Chronological split at sample granularity; test samples strictly follow
// every training sample.
template <typename T>
inline std::pair<std::vector<T>, std::vector<T>> chronological_split(const std::vector<T>& samples,
                                                                     double train_fraction) {
    auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(samples.size())));
    n_train = std::min(n_train, samples.size());
    return {std::vector<T>(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n_train)),
            std::vector<T>(samples.begin() + static_cast<std::ptrdiff_t>(n_train), samples.end())};
}

// Packs samples into B-row batches. With drop_partial the trailing remainder
// is discarded so every batch conforms to the B x B filtering matrix.
inline std::vector<Batch> to_batches(const std::vector<Sample>& samples, std::size_t batch_size,
                                     bool drop_partial = true) {
    if (batch_size < 1) throw ValidationError("to_batches: batch size must be >= 1");
    std::vector<Batch> out;
    std::size_t full = samples.size() / batch_size;
    std::size_t tail = samples.size() % batch_size;
    std::size_t count = full + ((tail && !drop_partial) ? 1 : 0);
    for (std::size_t b = 0; b < count; ++b) {
        std::size_t lo = b * batch_size;
        std::size_t hi = std::min(lo + batch_size, samples.size());
        std::size_t rows = hi - lo;
        Batch batch{Tensor(rows, samples[lo].cv.size()), Tensor(rows, samples[lo].pv.size()), Tensor(rows, 1)};
        for (std::size_t i = 0; i < rows; ++i) {
            const Sample& s = samples[lo + i];
            for (std::size_t j = 0; j < s.cv.size(); ++j) batch.cv.at(i, j) = s.cv[j];
            for (std::size_t j = 0; j < s.pv.size(); ++j) batch.pv.at(i, j) = s.pv[j];
            batch.targets.at(i, 0) = s.y;
        }
        out.push_back(std::move(batch));
    }
    return out;
}

namespace detail {

// Accepts integer epoch-hours or ISO-8601 ("YYYY-MM-DDTHH:MM[:SS]", optional
// trailing 'Z', 'T' or space separator). Returns a comparable tick count.
inline long long parse_timestamp(const std::string& field, long line_no) {
    if (field.empty()) throw ParseError("empty timestamp", line_no);
    bool numeric = true;
    for (std::size_t i = 0; i < field.size(); ++i) {
        char ch = field[i];
        if (!(std::isdigit(static_cast<unsigned char>(ch)) || (i == 0 && (ch == '-' || ch == '+')))) {
            numeric = false;
            break;
        }
    }
    if (numeric) {
        try {
            return std::stoll(field);
        } catch (const std::exception&) {
            throw ParseError("timestamp out of range: " + field, line_no);
        }
    }
    std::tm tm{};
    int year, mon, day, hour = 0, min = 0, sec = 0;
    char sep = 0;
    int got = std::sscanf(field.c_str(), "%d-%d-%d%c%d:%d:%d", &year, &mon, &day, &sep, &hour, &min, &sec);
    if (got < 3 || (got > 3 && sep != 'T' && sep != ' '))
        throw ParseError("unparseable timestamp: " + field, line_no);
    tm.tm_year = year - 1900;
    tm.tm_mon = mon - 1;
    tm.tm_mday = day;
    tm.tm_hour = hour;
    tm.tm_min = min;
    tm.tm_sec = sec;
    std::time_t t = timegm(&tm);
    if (t == static_cast<std::time_t>(-1)) throw ParseError("unparseable timestamp: " + field, line_no);
    return static_cast<long long>(t);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace detail

// Reads `client_id,timestamp,value` rows into one series per client, ordered
// by timestamp. Duplicate (client, timestamp) pairs and non-uniform spacing
// are schema errors; malformed rows are parse errors naming the line.
inline std::vector<TrafficSeries> ingest_csv(const std::string& path, std::size_t period = 1) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV file: " + path);
    std::string line;
    long line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty CSV file: " + path, 1);
    ++line_no;
    {
        auto header = detail::split_csv_line(line);
        if (header.size() != 3 || header[0] != "client_id" || header[1] != "timestamp" || header[2] != "value")
            throw ParseError("expected header client_id,timestamp,value", line_no);
    }
    std::map<int, std::map<long long, double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != 3) throw ParseError("expected 3 fields, got " + std::to_string(fields.size()), line_no);
        int client;
        double value;
        try {
            std::size_t pos = 0;
            client = std::stoi(fields[0], &pos);
            if (pos != fields[0].size()) throw std::invalid_argument(fields[0]);
        } catch (const std::exception&) {
            throw ParseError("bad client_id: '" + fields[0] + "'", line_no);
        }
        long long ts = detail::parse_timestamp(fields[1], line_no);
        try {
            std::size_t pos = 0;
            value = std::stod(fields[2], &pos);
            if (pos != fields[2].size()) throw std::invalid_argument(fields[2]);
        } catch (const std::exception&) {
            throw ParseError("bad value: '" + fields[2] + "'", line_no);
        }
        auto [it, inserted] = rows[client].emplace(ts, value);
        (void)it;
        if (!inserted)
            throw ParseError("duplicate (client_id, timestamp) = (" + fields[0] + ", " + fields[1] + ")", line_no);
    }
    if (rows.empty()) throw ValidationError("ingest_csv: no data rows in " + path);
    std::vector<TrafficSeries> out;
    for (auto& [client, by_ts] : rows) {
        TrafficSeries s;
        s.client_id = client;
        s.period = period;
        long long prev_ts = 0, spacing = 0;
        bool first = true, second = true;
        for (auto& [ts, value] : by_ts) {
            if (!first) {
                long long d = ts - prev_ts;
                if (second) {
                    spacing = d;
                    second = false;
                } else if (d != spacing) {
                    throw ParseError("non-uniform timestamp spacing for client " + std::to_string(client) +
                                     " at timestamp " + std::to_string(ts));
                }
            }
            first = false;
            prev_ts = ts;
            s.values.push_back(value);
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline void write_csv(const std::string& path, const std::vector<TrafficSeries>& series) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write CSV file: " + path);
    out << "client_id,timestamp,value\n";
    char buf[64];
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.values.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", s.values[k]);
            out << s.client_id << ',' << k << ',' << buf << '\n';
        }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace fuels::data
