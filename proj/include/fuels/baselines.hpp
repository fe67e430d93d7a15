#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fuels/adam.hpp"
#include "fuels/autodiff.hpp"
#include "fuels/config.hpp"
#include "fuels/error.hpp"
#include "fuels/federation.hpp"
#include "fuels/losses.hpp"
#include "fuels/model.hpp"

// Reference methods for comparison runs: Solo (no communication), FedAvg
// (weighted parameter averaging), FedProx (proximal-regularized local loss)
// and FedRep (shared encoder, personal decoder). All reuse the federation
// fixtures and train with the prediction loss only.

namespace fuels::baselines {

enum class ParamScope { kPredictor, kEncoder };

namespace detail {

inline bool in_scope(const std::string& name, ParamScope scope) {
    if (name == "filter") return false;  // FUELS-specific, never communicated
    if (scope == ParamScope::kEncoder) return name.rfind("enc.", 0) == 0;
    return true;
}

}  // namespace detail

// Data-size-weighted average of every parameter tensor in scope, written
// into `global`. Weights are normalized internally.
inline void fedavg_aggregate(std::vector<model::ClientModel*> models, std::vector<double> weights,
                             model::ClientModel& global, ParamScope scope = ParamScope::kPredictor) {
    if (models.empty() || models.size() != weights.size())
        throw ValidationError("fedavg_aggregate: need one weight per model");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ValidationError("fedavg_aggregate: negative weight");
        total += w;
    }
    if (total <= 0.0) throw ValidationError("fedavg_aggregate: weights sum to zero");
    auto dst = model::named_params(global);
    for (std::size_t pi = 0; pi < dst.size(); ++pi) {
        if (!detail::in_scope(dst[pi].first, scope)) continue;
        Tensor& out = *dst[pi].second;
        Tensor acc(out.rows, out.cols);
        for (std::size_t mi = 0; mi < models.size(); ++mi) {
            auto src = model::named_params(*models[mi]);
            const Tensor& t = *src[pi].second;
            if (!t.same_shape(out)) throw DimensionError("fedavg_aggregate: parameter shape mismatch");
            double w = weights[mi] / total;
            for (std::size_t k = 0; k < t.size(); ++k) acc.data[k] += w * t.data[k];
        }
        out = std::move(acc);
    }
}

// (mu / 2) ||w - w_global||^2 summed over predictor parameters.
inline double fedprox_term(model::ClientModel& w, model::ClientModel& w_global, double mu) {
    if (mu < 0.0) throw ValidationError("fedprox_term: mu must be >= 0");
    if (mu == 0.0) return 0.0;
    auto a = model::named_params(w);
    auto b = model::named_params(w_global);
    double sq = 0.0;
    for (std::size_t pi = 0; pi < a.size(); ++pi) {
        if (!detail::in_scope(a[pi].first, ParamScope::kPredictor)) continue;
        const Tensor &ta = *a[pi].second, &tb = *b[pi].second;
        if (!ta.same_shape(tb)) throw DimensionError("fedprox_term: parameter shape mismatch");
        for (std::size_t k = 0; k < ta.size(); ++k) {
            double d = ta.data[k] - tb.data[k];
            sq += d * d;
        }
    }
    return 0.5 * mu * sq;
}

namespace detail {

inline ExperimentConfig pred_only(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.use_intra = false;
    c.use_inter = false;
    c.rho = 0.0;
    return c;
}

// Prediction-loss local training with the FedProx proximal pull. Mirrors the
// pred-only path of client_execute but adds mu (w - w_global) to each
// gradient inside the same optimizer step.
inline losses::LossBreakdown prox_local_train(fed::ClientState& state, model::ClientModel& global, double mu,
                                              const ExperimentConfig& cfg, std::size_t round) {
    AdamConfig adam{cfg.learning_rate, 0.9, 0.999, 1e-8};
    auto params = model::named_params(state.mdl);
    auto anchor = model::named_params(global);
    if (state.opt.size() != params.size()) state.opt.assign(params.size(), AdamState());
    losses::LossBreakdown acc;
    std::size_t steps = 0;
    try {
        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            for (const auto& batch : state.train_raw) {
                Graph g;
                auto leaves = model::bind_model(g, state.mdl, true, false);
                int repr = model::encode(g, leaves, batch);
                int preds = model::decode(g, leaves, repr);
                int pred = losses::pred_loss(g, g.constant(batch.targets), preds);
                g.backward(pred);
                std::vector<int> leaf_ids = {leaves.closeness.wz, leaves.closeness.wr, leaves.closeness.wh,
                                             leaves.closeness.uz, leaves.closeness.ur, leaves.closeness.uh,
                                             leaves.closeness.bz, leaves.closeness.br, leaves.closeness.bh,
                                             leaves.periodicity.wz, leaves.periodicity.wr, leaves.periodicity.wh,
                                             leaves.periodicity.uz, leaves.periodicity.ur, leaves.periodicity.uh,
                                             leaves.periodicity.bz, leaves.periodicity.br, leaves.periodicity.bh,
                                             leaves.dec_weight, leaves.dec_bias, leaves.filter};
                for (std::size_t pi = 0; pi < params.size(); ++pi) {
                    if (!g.has_grad(leaf_ids[pi])) continue;
                    Tensor grad = g.grad(leaf_ids[pi]);
                    if (in_scope(params[pi].first, ParamScope::kPredictor)) {
                        const Tensor& w = *params[pi].second;
                        const Tensor& wg = *anchor[pi].second;
                        for (std::size_t k = 0; k < grad.size(); ++k) grad.data[k] += mu * (w.data[k] - wg.data[k]);
                    }
                    adam_step(*params[pi].second, grad, state.opt[pi], adam);
                }
                acc.pred += g.value(pred).at(0, 0);
                acc.total += g.value(pred).at(0, 0) + fedprox_term(state.mdl, global, mu);
                ++steps;
            }
        }
    } catch (const DomainError& e) {
        throw TrainingError("client " + std::to_string(state.id) + " diverged in round " + std::to_string(round) +
                            ": " + e.what());
    }
    if (steps > 0) {
        acc.pred /= static_cast<double>(steps);
        acc.total /= static_cast<double>(steps);
    }
    return acc;
}

inline void copy_scope(model::ClientModel& dst, model::ClientModel& src, ParamScope scope) {
    auto d = model::named_params(dst);
    auto s = model::named_params(src);
    for (std::size_t pi = 0; pi < d.size(); ++pi)
        if (in_scope(d[pi].first, scope)) *d[pi].second = *s[pi].second;
}

}  // namespace detail

// Round-synchronous baseline driver sharing the FUELS fixtures, selection
// rule and report formats. Baseline rounds never touch prototypes or the
// JSD machinery.
inline fed::TrainOutcome run_baseline(const ExperimentConfig& cfg) {
    if (cfg.method == "fuels") throw ValidationError("run_baseline: use run_training for fuels");
    fed::TrainOutcome out(cfg.clients);
    out.clients = fed::build_clients(cfg);
    std::size_t n = out.clients.size();
    bool is_solo = cfg.method == "solo";
    bool is_fedrep = cfg.method == "fedrep";
    bool is_fedprox = cfg.method == "fedprox";
    ExperimentConfig local_cfg = detail::pred_only(cfg);
    // Federated methods start from one shared initialization.
    model::ClientModel global = model::init_model(cfg.hidden_size, cfg.batch_size, rng::substream(cfg.seed, n));
    fed::CommAccounting acc = fed::comm_accounting(cfg);
    for (std::size_t t = 1; t <= cfg.rounds; ++t) {
        auto t0 = std::chrono::steady_clock::now();
        std::vector<int> selected = is_solo ? fed::select_clients(n, 1.0, 1, cfg.seed)
                                            : fed::select_clients(n, cfg.alpha, t, cfg.seed);
        // Sync: selected clients receive the shared parameters and restart
        // local optimizer state; Solo keeps training continuously.
        if (!is_solo)
            for (int id : selected) {
                auto& st = out.clients[static_cast<std::size_t>(id)];
                detail::copy_scope(st.mdl, global, is_fedrep ? ParamScope::kEncoder : ParamScope::kPredictor);
                st.opt.clear();
            }
        std::vector<losses::LossBreakdown> losses_by_client(n);
        fed::detail::parallel_for(selected, cfg.threads, [&](int id) {
            auto& st = out.clients[static_cast<std::size_t>(id)];
            if (is_fedprox && cfg.fedprox_mu > 0.0) {
                losses_by_client[static_cast<std::size_t>(id)] =
                    detail::prox_local_train(st, global, cfg.fedprox_mu, cfg, t);
            } else {
                auto res = fed::client_execute(st, Tensor(), Tensor(), local_cfg, t, false);
                losses_by_client[static_cast<std::size_t>(id)] = res.loss;
            }
        });
        if (!is_solo) {
            std::vector<model::ClientModel*> models;
            std::vector<double> weights;
            for (int id : selected) {
                auto& st = out.clients[static_cast<std::size_t>(id)];
                models.push_back(&st.mdl);
                weights.push_back(static_cast<double>(st.train_raw.size() * cfg.batch_size));
            }
            fedavg_aggregate(models, weights, global,
                             is_fedrep ? ParamScope::kEncoder : ParamScope::kPredictor);
            // FedRep redistributes the shared encoder; decoders stay local.
            if (is_fedrep)
                for (auto& st : out.clients) detail::copy_scope(st.mdl, global, ParamScope::kEncoder);
        }
        fed::RoundReport report;
        report.round = t;
        report.clients.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            fed::ClientLedger& led = report.clients[i];
            led.id = static_cast<int>(i);
            bool was_selected = std::binary_search(selected.begin(), selected.end(), static_cast<int>(i));
            led.trained = was_selected;
            if (was_selected) {
                led.loss = losses_by_client[i];
                led.uplink = acc.uplink_per_client;
                led.downlink = acc.downlink_per_client;
                report.uplink_total += led.uplink;
                report.downlink_total += led.downlink;
            }
            // FedAvg/FedProx report the shared model's fit; the personalized
            // methods report each client's own model.
            const model::ClientModel& eval_model =
                (!is_solo && !is_fedrep) ? global : out.clients[i].mdl;
            auto [mse, mae] = fed::evaluate(eval_model, out.clients[i].test);
            led.mse = mse;
            led.mae = mae;
        }
        report.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        out.rounds.push_back(std::move(report));
    }
    return out;
}

}  // namespace fuels::baselines
