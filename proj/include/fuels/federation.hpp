#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fuels/adam.hpp"
#include "fuels/autodiff.hpp"
#include "fuels/config.hpp"
#include "fuels/data.hpp"
#include "fuels/error.hpp"
#include "fuels/losses.hpp"
#include "fuels/model.hpp"
#include "fuels/prototypes.hpp"
#include "fuels/rng.hpp"

// Round-synchronous federation. Clients execute concurrently with no shared
// mutable state; the server updates the prototype registry, refreshes the
// pairwise JSD cache for clients that changed, recomputes the threshold and
// aggregates client-customized global prototypes for the next round.

namespace fuels::fed {

constexpr double kTrainFraction = 0.8;

struct ClientState {
    int id = -1;
    model::ClientModel mdl;
    std::vector<data::Batch> train_raw;
    std::vector<data::Batch> train_aug;  // index-aligned with train_raw
    std::vector<data::Batch> test;
    std::vector<AdamState> opt;          // aligned with model::named_params order
    data::NormStats stats;
    std::size_t cluster = 0;             // synthetic ground truth, for reports
};

struct ClientLedger {
    int id = -1;
    bool trained = false;
    losses::LossBreakdown loss;      // mean over the round's batches (if trained)
    double mse = 0.0, mae = 0.0;
    std::size_t positives = 0, negatives = 0;
    std::size_t uplink = 0, downlink = 0;
};

struct RoundReport {
    std::size_t round = 0;
    double beta = 0.0;
    std::size_t jsd_recomputed = 0;
    std::size_t uplink_total = 0, downlink_total = 0;
    double wall_ms = 0.0;
    std::vector<ClientLedger> clients;
};

// Symmetric pairwise JSD store. Values for pairs untouched by a round are
// carried over bit-identically; only pairs with a refreshed endpoint are
// recomputed.
class JsdCache {
public:
    explicit JsdCache(std::size_t n) : n_(n), vals_(n * n, 0.0) {}

    double at(std::size_t i, std::size_t j) const { return vals_[i * n_ + j]; }
    std::size_t size() const { return n_; }

    // Recomputes every pair with at least one changed endpoint (both
    // endpoints must have a prototype). Returns the recomputation count.
    std::size_t update(const std::vector<std::vector<double>>& dists, const std::vector<bool>& have,
                       const std::vector<int>& changed) {
        std::vector<bool> dirty(n_, false);
        for (int c : changed) dirty[static_cast<std::size_t>(c)] = true;
        std::size_t recomputed = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (!have[i]) continue;
            for (std::size_t j = i + 1; j < n_; ++j) {
                if (!have[j] || (!dirty[i] && !dirty[j])) continue;
                double v = proto::jsd(dists[i], dists[j]);
                vals_[i * n_ + j] = v;
                vals_[j * n_ + i] = v;
                ++recomputed;
            }
        }
        return recomputed;
    }

    // Upper-triangle values over clients that hold prototypes.
    std::vector<double> pair_values(const std::vector<bool>& have) const {
        std::vector<double> out;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j)
                if (have[i] && have[j]) out.push_back(at(i, j));
        return out;
    }

private:
    std::size_t n_;
    std::vector<double> vals_;
};

struct ServerState {
    std::vector<proto::Prototype> registry;
    std::vector<std::vector<double>> dists;  // softmax distribution per prototype
    std::vector<bool> have;
    JsdCache cache;
    double beta = 0.0;

    explicit ServerState(std::size_t n) : registry(n), dists(n), have(n, false), cache(n) {}
};

// Nearest-rank percentile of the pairwise JSD population.
inline double compute_beta(std::vector<double> values, double percentile) {
    if (values.empty()) throw ValidationError("compute_beta: empty value set");
    if (percentile < 0.0 || percentile > 100.0) throw ValidationError("compute_beta: percentile out of [0, 100]");
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(values.size())));
    rank = std::min(std::max<std::size_t>(rank, 1), values.size());
    return values[rank - 1];
}

// Splits all other prototype-holding clients by the threshold: JSD <= beta
// goes to the positive set. The two sets partition {1..N} \ {n}.
inline std::pair<std::vector<int>, std::vector<int>> partition(std::size_t n, const JsdCache& cache,
                                                               const std::vector<bool>& have, double beta) {
    std::vector<int> positives, negatives;
    for (std::size_t m = 0; m < cache.size(); ++m) {
        if (m == n || !have[m]) continue;
        (cache.at(n, m) <= beta ? positives : negatives).push_back(static_cast<int>(m));
    }
    return {positives, negatives};
}

namespace detail {

inline Tensor mean_of(const std::vector<proto::Prototype>& registry, const std::vector<int>& ids,
                      std::size_t rows_cap) {
    std::vector<Tensor> mats;
    mats.reserve(ids.size());
    for (int m : ids) {
        const Tensor& full = registry[static_cast<std::size_t>(m)].mat;
        if (full.rows <= rows_cap) {
            mats.push_back(full);
        } else {
            Tensor t(rows_cap, full.cols);
            std::copy(full.data.begin(), full.data.begin() + static_cast<std::ptrdiff_t>(rows_cap * full.cols),
                      t.data.begin());
            mats.push_back(std::move(t));
        }
    }
    return proto::periodicity_prototype(mats);  // plain element-wise average
}

}  // namespace detail

// Customized aggregation for one client. Empty positive set falls back to
// the client's own prototype; empty negative set yields the all-zero
// sentinel (the negative term is then omitted downstream). rows_cap trims
// concatenation-based prototypes to a common row count.
inline std::pair<Tensor, Tensor> aggregate(const std::vector<int>& positives, const std::vector<int>& negatives,
                                           const std::vector<proto::Prototype>& registry, std::size_t self,
                                           std::size_t rows_cap) {
    Tensor pr = positives.empty()
                    ? detail::mean_of(registry, {static_cast<int>(self)}, rows_cap)
                    : detail::mean_of(registry, positives, rows_cap);
    Tensor nr = negatives.empty() ? Tensor(pr.rows, pr.cols)
                                  : detail::mean_of(registry, negatives, rows_cap);
    return {std::move(pr), std::move(nr)};
}

// Round 1 runs every client; later rounds draw ceil(N * alpha) without
// replacement from a (seed, round) stream.
inline std::vector<int> select_clients(std::size_t n, double alpha, std::size_t round, std::uint64_t seed) {
    if (alpha <= 0.0 || alpha > 1.0) throw ValidationError("select_clients: alpha out of (0, 1]");
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    if (round <= 1 || alpha >= 1.0) return all;
    auto k = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n)));
    k = std::min(std::max<std::size_t>(k, 1), n);
    auto rng = rng::make_stream(seed, rng::kSelection, round);
    for (std::size_t i = 0; i < k; ++i) {
        auto j = i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(n - i));
        j = std::min(j, n - 1);
        std::swap(all[i], all[j]);
    }
    all.resize(k);
    std::sort(all.begin(), all.end());
    return all;
}

struct ClientRoundResult {
    Tensor prototype;
    losses::LossBreakdown loss;
    std::size_t tn_pairs = 0;  // surviving true-negative pairs, last batch
};

// One local epoch set: per aligned batch pair, encode raw and augmented
// views, assemble the combined objective, take one Adam step on every
// parameter. Raw representations are collected during the pass and averaged
// (or stacked) into the fresh prototype afterwards.
inline ClientRoundResult client_execute(ClientState& state, const Tensor& pos_proto, const Tensor& neg_proto,
                                        const ExperimentConfig& cfg, std::size_t round,
                                        bool need_prototype = true) {
    AdamConfig adam{cfg.learning_rate, 0.9, 0.999, 1e-8};
    auto params = model::named_params(state.mdl);
    if (state.opt.size() != params.size()) state.opt.assign(params.size(), AdamState());
    ClientRoundResult out;
    losses::LossBreakdown acc;
    std::size_t steps = 0;
    try {
        std::vector<Tensor> reprs;
        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            reprs.clear();
            reprs.reserve(state.train_raw.size());
            for (std::size_t bi = 0; bi < state.train_raw.size(); ++bi) {
                Graph g;
                auto leaves = model::bind_model(g, state.mdl, true, cfg.learn_filter);
                int repr = model::encode(g, leaves, state.train_raw[bi]);
                int intra = -1;
                if (cfg.use_intra) {
                    int repr_aug = model::encode(g, leaves, state.train_aug[bi]);
                    auto task = losses::intra_task(g, repr, repr_aug, leaves.filter, cfg.tau);
                    intra = task.loss;
                    out.tn_pairs = 0;
                    for (const auto& tn : task.true_negatives) out.tn_pairs += tn.size();
                } else {
                    intra = g.scalar_constant(0.0);
                }
                int inter = cfg.use_inter ? losses::inter_loss(g, repr, pos_proto, neg_proto, cfg.tau)
                                          : g.scalar_constant(0.0);
                int preds = model::decode(g, leaves, repr);
                int pred = losses::pred_loss(g, g.constant(state.train_raw[bi].targets), preds);
                int total = losses::total_loss(g, pred, intra, inter, cfg.rho);
                if (need_prototype) reprs.push_back(g.value(repr));
                g.backward(total);
                std::vector<int> leaf_ids = {leaves.closeness.wz, leaves.closeness.wr, leaves.closeness.wh,
                                             leaves.closeness.uz, leaves.closeness.ur, leaves.closeness.uh,
                                             leaves.closeness.bz, leaves.closeness.br, leaves.closeness.bh,
                                             leaves.periodicity.wz, leaves.periodicity.wr, leaves.periodicity.wh,
                                             leaves.periodicity.uz, leaves.periodicity.ur, leaves.periodicity.uh,
                                             leaves.periodicity.bz, leaves.periodicity.br, leaves.periodicity.bh,
                                             leaves.dec_weight, leaves.dec_bias, leaves.filter};
                for (std::size_t pi = 0; pi < params.size(); ++pi)
                    if (g.has_grad(leaf_ids[pi])) adam_step(*params[pi].second, g.grad(leaf_ids[pi]), state.opt[pi], adam);
                auto bd = losses::read_breakdown(g, pred, intra, inter, total, cfg.rho);
                acc.pred += bd.pred;
                acc.intra += bd.intra;
                acc.inter += bd.inter;
                acc.total += bd.total;
                ++steps;
            }
        }
        if (need_prototype) {
            out.prototype = cfg.prototype_mode == "concat" ? proto::concat_prototype(reprs)
                                                           : proto::periodicity_prototype(reprs);
        }
    } catch (const DomainError& e) {
        throw TrainingError("client " + std::to_string(state.id) + " diverged in round " + std::to_string(round) +
                            ": " + e.what());
    }
    if (steps > 0) {
        acc.pred /= static_cast<double>(steps);
        acc.intra /= static_cast<double>(steps);
        acc.inter /= static_cast<double>(steps);
        acc.total /= static_cast<double>(steps);
    }
    acc.rho = cfg.rho;
    out.loss = acc;
    return out;
}

// Inference is encode + decode only; metrics on the normalized scale.
inline std::pair<double, double> evaluate(const model::ClientModel& mdl, const std::vector<data::Batch>& test) {
    if (test.empty()) throw ValidationError("evaluate: empty test set");
    double sse = 0.0, sae = 0.0;
    std::size_t count = 0;
    for (const auto& batch : test) {
        Graph g;
        auto leaves = model::bind_model(g, mdl, false);
        int preds = model::decode(g, leaves, model::encode(g, leaves, batch));
        const Tensor& yhat = g.value(preds);
        for (std::size_t i = 0; i < batch.targets.rows; ++i) {
            double d = batch.targets.at(i, 0) - yhat.at(i, 0);
            sse += d * d;
            sae += std::fabs(d);
            ++count;
        }
    }
    return {sse / static_cast<double>(count), sae / static_cast<double>(count)};
}

// Builds the shared per-client fixtures (normalized series, aligned windowed
// datasets, batches, seeded models). Every method trains and evaluates on
// exactly these.
inline std::vector<ClientState> build_clients(const ExperimentConfig& cfg) {
    validate(cfg);
    std::vector<data::TrafficSeries> series =
        cfg.data_csv.empty()
            ? data::generate_synthetic(cfg.clients, cfg.clusters, cfg.series_length, cfg.period, cfg.seed,
                                       cfg.synth_noise)
            : data::ingest_csv(cfg.data_csv, cfg.period);
    std::vector<ClientState> clients(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        ClientState& st = clients[i];
        st.id = static_cast<int>(i);
        st.cluster = cfg.data_csv.empty() ? i % cfg.clusters : 0;
        st.stats = data::normalize(series[i], kTrainFraction);
        auto aligned = data::augment_temporal_shift(series[i], cfg.closeness_window, cfg.periodic_window, cfg.period,
                                                    cfg.shift);
        auto n_train =
            static_cast<std::size_t>(std::floor(kTrainFraction * static_cast<double>(aligned.raw.size())));
        std::vector<data::Sample> train_raw(aligned.raw.begin(),
                                            aligned.raw.begin() + static_cast<std::ptrdiff_t>(n_train));
        std::vector<data::Sample> train_aug(aligned.augmented.begin(),
                                            aligned.augmented.begin() + static_cast<std::ptrdiff_t>(n_train));
        std::vector<data::Sample> test(aligned.raw.begin() + static_cast<std::ptrdiff_t>(n_train),
                                       aligned.raw.end());
        if (train_raw.size() < cfg.batch_size)
            throw ValidationError("build_clients: client " + std::to_string(i) + " has no full training batch");
        if (test.empty())
            throw ValidationError("build_clients: client " + std::to_string(i) + " has an empty test split");
        st.train_raw = data::to_batches(train_raw, cfg.batch_size, true);
        st.train_aug = data::to_batches(train_aug, cfg.batch_size, true);
        st.test = data::to_batches(test, cfg.batch_size, false);
        // Federated methods start from one shared model (seed salt = N, the
        // same model the baselines broadcast); Solo clients are independent.
        std::uint64_t init_seed =
            cfg.method == "solo" ? rng::substream(cfg.seed, i) : rng::substream(cfg.seed, clients.size());
        st.mdl = model::init_model(cfg.hidden_size, cfg.batch_size, init_seed);
    }
    return clients;
}

namespace detail {

// Runs fn(i) for every index in ids, spreading work over `threads` workers.
// Results land in caller-owned slots, so the outcome is independent of the
// thread count.
template <typename Fn>
inline void parallel_for(const std::vector<int>& ids, std::size_t threads, Fn&& fn) {
    if (threads == 0) threads = std::max<std::size_t>(std::thread::hardware_concurrency(), 1);
    threads = std::min<std::size_t>(threads, ids.size());
    if (threads <= 1) {
        for (int id : ids) fn(id);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next.fetch_add(1); i < ids.size(); i = next.fetch_add(1)) fn(ids[i]);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline std::size_t common_rows(const std::vector<proto::Prototype>& registry, const std::vector<bool>& have) {
    std::size_t rows = 0;
    bool any = false;
    for (std::size_t i = 0; i < registry.size(); ++i)
        if (have[i]) {
            rows = any ? std::min(rows, registry[i].mat.rows) : registry[i].mat.rows;
            any = true;
        }
    return any ? rows : 0;
}

inline std::vector<double> distribution_capped(const Tensor& mat, std::size_t rows_cap) {
    if (mat.rows <= rows_cap) return proto::prototype_to_distribution(mat);
    Tensor t(rows_cap, mat.cols);
    std::copy(mat.data.begin(), mat.data.begin() + static_cast<std::ptrdiff_t>(rows_cap * mat.cols), t.data.begin());
    return proto::prototype_to_distribution(t);
}

// First B rows of an aggregate; the inter-client loss consumes exactly one
// row per batch position.
inline Tensor cap_rows(const Tensor& t, std::size_t rows) {
    if (t.rows <= rows) return t;
    Tensor out(rows, t.cols);
    std::copy(t.data.begin(), t.data.begin() + static_cast<std::ptrdiff_t>(rows * t.cols), out.data.begin());
    return out;
}

}  // namespace detail

struct TrainOutcome {
    std::vector<RoundReport> rounds;
    std::vector<ClientState> clients;
    ServerState server;
    TrainOutcome(std::size_t n) : server(n) {}
};

// ServerExecute: T rounds of select -> parallel client execution -> registry
// and JSD-cache refresh -> threshold -> partition -> aggregation. Global
// prototypes computed in round t are consumed in round t+1; round 1 trains
// with the zero sentinel and thus skips the inter-client task.
inline TrainOutcome run_training(const ExperimentConfig& cfg) {
    if (cfg.method != "fuels") throw ValidationError("run_training: method must be 'fuels'");
    TrainOutcome out(cfg.clients);
    out.clients = build_clients(cfg);
    std::size_t n = out.clients.size();
    ServerState& server = out.server;
    std::vector<Tensor> pos_global(n), neg_global(n);  // empty tensors act as sentinels
    for (std::size_t t = 1; t <= cfg.rounds; ++t) {
        auto t0 = std::chrono::steady_clock::now();
        std::vector<int> selected = select_clients(n, cfg.alpha, t, cfg.seed);
        std::vector<ClientRoundResult> results(n);
        detail::parallel_for(selected, cfg.threads, [&](int id) {
            auto i = static_cast<std::size_t>(id);
            results[i] = client_execute(out.clients[i], pos_global[i], neg_global[i], cfg, t);
        });
        // Uplink: prototypes (noised if configured) replace registry entries.
        for (int id : selected) {
            auto i = static_cast<std::size_t>(id);
            Tensor up = std::move(results[i].prototype);
            if (cfg.noise && cfg.noise->scale > 0.0)
                up = proto::add_privacy_noise(up, cfg.noise->kind, cfg.noise->scale,
                                              rng::substream(cfg.seed, 0x4015E, i, t));
            server.registry[i] = proto::Prototype{id, t, std::move(up)};
            server.have[i] = true;
        }
        std::size_t rows_cap = detail::common_rows(server.registry, server.have);
        // Concatenation-based prototypes can shrink the common row count when
        // dataset sizes differ; distributions must then be rebuilt for all.
        bool rebuild_all = false;
        if (cfg.prototype_mode == "concat") {
            for (std::size_t i = 0; i < n; ++i)
                if (server.have[i] && !server.dists[i].empty() &&
                    server.dists[i].size() != rows_cap * server.registry[i].mat.cols)
                    rebuild_all = true;
        }
        std::vector<int> changed = selected;
        if (rebuild_all) {
            changed.clear();
            for (std::size_t i = 0; i < n; ++i)
                if (server.have[i]) changed.push_back(static_cast<int>(i));
        }
        for (int id : changed) {
            auto i = static_cast<std::size_t>(id);
            server.dists[i] = detail::distribution_capped(server.registry[i].mat, rows_cap);
        }
        std::size_t recomputed = server.cache.update(server.dists, server.have, changed);
        auto pairs = server.cache.pair_values(server.have);
        if (!pairs.empty()) server.beta = compute_beta(pairs, cfg.beta_percentile);
        RoundReport report;
        report.round = t;
        report.beta = server.beta;
        report.jsd_recomputed = recomputed;
        report.clients.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto [pc, nc] = partition(i, server.cache, server.have, server.beta);
            auto [pr, nr] = aggregate(pc, nc, server.registry, i, rows_cap);
            pos_global[i] = detail::cap_rows(pr, cfg.batch_size);
            neg_global[i] = detail::cap_rows(nr, cfg.batch_size);
            report.clients[i].positives = pc.size();
            report.clients[i].negatives = nc.size();
        }
        std::size_t downlink_per_client = 2 * cfg.batch_size * cfg.repr_dim();
        std::size_t receivers = cfg.distribute_all ? n : selected.size();
        report.uplink_total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            ClientLedger& led = report.clients[i];
            led.id = static_cast<int>(i);
            bool was_selected = std::binary_search(selected.begin(), selected.end(), static_cast<int>(i));
            led.trained = was_selected;
            if (was_selected) {
                led.loss = results[i].loss;
                led.uplink = server.registry[i].mat.size();
                report.uplink_total += led.uplink;
            }
            led.downlink = (cfg.distribute_all || was_selected) ? downlink_per_client : 0;
            auto [mse, mae] = evaluate(out.clients[i].mdl, out.clients[i].test);
            led.mse = mse;
            led.mae = mae;
        }
        report.downlink_total = receivers * downlink_per_client;
        report.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        out.rounds.push_back(std::move(report));
    }
    return out;
}

// --- communication accounting -------------------------------------------

struct CommAccounting {
    std::string method;
    std::size_t uplink_per_client = 0;    // elements per selected client per round
    std::size_t downlink_per_client = 0;  // elements per receiving client per round
    std::size_t model_params = 0;
    std::size_t encoder_params = 0;
};

inline CommAccounting comm_accounting(const ExperimentConfig& cfg) {
    validate(cfg);
    model::ClientModel probe = model::init_model(cfg.hidden_size, cfg.batch_size, 0);
    CommAccounting acc;
    acc.method = cfg.method;
    acc.encoder_params = model::encoder_param_count(probe);
    acc.model_params = model::predictor_param_count(probe);
    if (cfg.method == "fuels") {
        std::size_t rows = cfg.batch_size;
        if (cfg.prototype_mode == "concat") {
            std::size_t history = std::max(cfg.closeness_window, cfg.periodic_window * cfg.period) + cfg.shift;
            std::size_t samples = cfg.series_length - history;
            auto n_train = static_cast<std::size_t>(std::floor(kTrainFraction * static_cast<double>(samples)));
            rows = (n_train / cfg.batch_size) * cfg.batch_size;
        }
        acc.uplink_per_client = rows * cfg.repr_dim();
        acc.downlink_per_client = 2 * cfg.batch_size * cfg.repr_dim();
    } else if (cfg.method == "fedavg" || cfg.method == "fedprox") {
        acc.uplink_per_client = acc.model_params;
        acc.downlink_per_client = acc.model_params;
    } else if (cfg.method == "fedrep") {
        acc.uplink_per_client = acc.encoder_params;
        acc.downlink_per_client = acc.encoder_params;
    }  // solo: zero both ways
    return acc;
}

// --- convergence-theorem calculators --------------------------------------

struct TheoryParams {
    double loss_gap = 1.0;     // Lambda
    double target = 0.1;       // xi
    double local_iters = 1.0;  // I
    double lr = 0.001;         // eta
    double smoothness = 1.0;   // L1
    double lipschitz = 1.0;    // L_h
    double clients = 1.0;      // N
    double alpha = 1.0;
    double rho = 0.0;
    double grad_bound = 1.0;   // G
};

inline void validate(const TheoryParams& p) {
    if (p.loss_gap <= 0.0 || p.target <= 0.0 || p.local_iters <= 0.0 || p.lr <= 0.0)
        throw ValidationError("theory: Lambda, xi, I and eta must be positive");
    if (p.smoothness < 0.0 || p.lipschitz < 0.0 || p.rho < 0.0 || p.grad_bound < 0.0)
        throw ValidationError("theory: L1, L_h, rho and G must be >= 0");
    if (p.clients < 1.0 || p.alpha <= 0.0 || p.alpha > 1.0)
        throw ValidationError("theory: need N >= 1 and alpha in (0, 1]");
}

// T = Lambda / (xi I (eta - L1 eta^2) - rho eta L_h N alpha I^2 G).
inline double theory_round_bound(const TheoryParams& p) {
    validate(p);
    double denom = p.target * p.local_iters * (p.lr - p.smoothness * p.lr * p.lr) -
                   p.rho * p.lr * p.lipschitz * p.clients * p.alpha * p.local_iters * p.local_iters * p.grad_bound;
    if (denom <= 0.0) throw ValidationError("theory_round_bound: infeasible parameters (denominator <= 0)");
    return p.loss_gap / denom;
}

// eta < (xi - rho L_h N alpha I G) / (L1 xi); nullopt when no positive
// learning rate satisfies the bound.
inline std::optional<double> theory_lr_bound(const TheoryParams& p) {
    if (p.smoothness <= 0.0 || p.target <= 0.0)
        throw ValidationError("theory_lr_bound: requires L1 > 0 and xi > 0");
    double bound = (p.target - p.rho * p.lipschitz * p.clients * p.alpha * p.local_iters * p.grad_bound) /
                   (p.smoothness * p.target);
    if (bound <= 0.0) return std::nullopt;
    return bound;
}

}  // namespace fuels::fed
