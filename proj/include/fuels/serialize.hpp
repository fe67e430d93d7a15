#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fuels/error.hpp"
#include "fuels/federation.hpp"
#include "fuels/model.hpp"

// File artifacts of a run: model checkpoints (JSON array of named parameter
// tensors), line-delimited round reports, and the CSV exports used for
// tables and CDF plots.

namespace fuels::io {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// --- model checkpoints -----------------------------------------------------

inline nlohmann::json model_to_json(model::ClientModel& m) {
    nlohmann::json params = nlohmann::json::array();
    for (auto& [name, tensor] : model::named_params(m)) {
        params.push_back({{"name", name},
                          {"rows", tensor->rows},
                          {"cols", tensor->cols},
                          {"data", tensor->data}});
    }
    return params;
}

inline void model_from_json(const nlohmann::json& params, model::ClientModel& m) {
    auto dst = model::named_params(m);
    if (!params.is_array() || params.size() != dst.size())
        throw ValidationError("checkpoint: unexpected parameter count");
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const auto& p = params.at(i);
        if (p.at("name").get<std::string>() != dst[i].first)
            throw ValidationError("checkpoint: parameter order mismatch at '" + dst[i].first + "'");
        Tensor t(p.at("rows").get<std::size_t>(), p.at("cols").get<std::size_t>());
        auto data = p.at("data").get<std::vector<double>>();
        if (data.size() != t.size()) throw ValidationError("checkpoint: data length mismatch");
        t.data = std::move(data);
        if (!dst[i].second->same_shape(t)) throw DimensionError("checkpoint: shape mismatch at '" + dst[i].first + "'");
        *dst[i].second = std::move(t);
    }
}

inline void save_models(const std::string& path, std::vector<fed::ClientState>& clients, std::size_t hidden,
                        std::size_t batch) {
    nlohmann::json j{{"schema", "fuels-models-v1"}, {"hidden", hidden}, {"batch", batch}};
    j["clients"] = nlohmann::json::array();
    for (auto& st : clients)
        j["clients"].push_back({{"id", st.id}, {"params", model_to_json(st.mdl)}});
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(1) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

// Returns (client id, model) pairs; models are allocated from the stored
// hidden/batch sizes before the parameters are loaded into them.
inline std::vector<std::pair<int, model::ClientModel>> load_models(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
    if (j.value("schema", std::string()) != "fuels-models-v1")
        throw ValidationError("checkpoint: unknown schema");
    auto hidden = j.at("hidden").get<std::size_t>();
    auto batch = j.at("batch").get<std::size_t>();
    std::vector<std::pair<int, model::ClientModel>> out;
    for (const auto& c : j.at("clients")) {
        model::ClientModel m = model::init_model(hidden, batch, 0);
        model_from_json(c.at("params"), m);
        out.emplace_back(c.at("id").get<int>(), std::move(m));
    }
    return out;
}

// --- round reports ----------------------------------------------------------

inline nlohmann::json report_to_json(const fed::RoundReport& r) {
    nlohmann::json clients = nlohmann::json::array();
    for (const auto& c : r.clients) {
        nlohmann::json jc{{"id", c.id},          {"trained", c.trained},   {"mse", c.mse},
                          {"mae", c.mae},        {"positives", c.positives}, {"negatives", c.negatives},
                          {"uplink", c.uplink},  {"downlink", c.downlink}};
        if (c.trained) {
            jc["pred"] = c.loss.pred;
            jc["intra"] = c.loss.intra;
            jc["inter"] = c.loss.inter;
            jc["total"] = c.loss.total;
        } else {
            jc["pred"] = nullptr;
            jc["intra"] = nullptr;
            jc["inter"] = nullptr;
            jc["total"] = nullptr;
        }
        clients.push_back(std::move(jc));
    }
    return nlohmann::json{{"round", r.round},
                          {"beta", r.beta},
                          {"jsd_recomputed", r.jsd_recomputed},
                          {"uplink_total", r.uplink_total},
                          {"downlink_total", r.downlink_total},
                          {"wall_ms", r.wall_ms},
                          {"clients", std::move(clients)}};
}

inline void write_rounds_jsonl(const std::string& path, const std::vector<fed::RoundReport>& rounds) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& r : rounds) out << report_to_json(r).dump() << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<fed::RoundReport> read_rounds_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<fed::RoundReport> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("rounds log: ") + e.what(), line_no);
        }
        fed::RoundReport r;
        r.round = j.at("round").get<std::size_t>();
        r.beta = j.at("beta").get<double>();
        r.jsd_recomputed = j.at("jsd_recomputed").get<std::size_t>();
        r.uplink_total = j.at("uplink_total").get<std::size_t>();
        r.downlink_total = j.at("downlink_total").get<std::size_t>();
        r.wall_ms = j.at("wall_ms").get<double>();
        for (const auto& jc : j.at("clients")) {
            fed::ClientLedger c;
            c.id = jc.at("id").get<int>();
            c.trained = jc.at("trained").get<bool>();
            c.mse = jc.at("mse").get<double>();
            c.mae = jc.at("mae").get<double>();
            c.positives = jc.at("positives").get<std::size_t>();
            c.negatives = jc.at("negatives").get<std::size_t>();
            c.uplink = jc.at("uplink").get<std::size_t>();
            c.downlink = jc.at("downlink").get<std::size_t>();
            if (c.trained) {
                c.loss.pred = jc.at("pred").get<double>();
                c.loss.intra = jc.at("intra").get<double>();
                c.loss.inter = jc.at("inter").get<double>();
                c.loss.total = jc.at("total").get<double>();
            }
            r.clients.push_back(std::move(c));
        }
        out.push_back(std::move(r));
    }
    return out;
}

// --- CSV exports -------------------------------------------------------------

inline void write_metrics_csv(const std::string& path, const fed::RoundReport& final_round) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "client_id,mse,mae\n";
    for (const auto& c : final_round.clients)
        out << c.id << ',' << fmt_double(c.mse) << ',' << fmt_double(c.mae) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

// Empirical CDF of final per-client MSEs; fractions are non-decreasing.
inline void write_cdf_csv(const std::string& path, const fed::RoundReport& final_round) {
    std::vector<double> mses;
    for (const auto& c : final_round.clients) mses.push_back(c.mse);
    std::sort(mses.begin(), mses.end());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "mse_threshold,fraction_of_clients\n";
    for (std::size_t i = 0; i < mses.size(); ++i)
        out << fmt_double(mses[i]) << ','
            << fmt_double(static_cast<double>(i + 1) / static_cast<double>(mses.size())) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline void write_loss_curve_csv(const std::string& path, const std::vector<fed::RoundReport>& rounds) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "round,pred,intra,inter,total,mse,mae\n";
    for (const auto& r : rounds) {
        double pred = 0, intra = 0, inter = 0, total = 0, mse = 0, mae = 0;
        std::size_t trained = 0;
        for (const auto& c : r.clients) {
            if (c.trained) {
                pred += c.loss.pred;
                intra += c.loss.intra;
                inter += c.loss.inter;
                total += c.loss.total;
                ++trained;
            }
            mse += c.mse;
            mae += c.mae;
        }
        auto n = static_cast<double>(r.clients.size());
        auto tr = static_cast<double>(std::max<std::size_t>(trained, 1));
        out << r.round << ',' << fmt_double(pred / tr) << ',' << fmt_double(intra / tr) << ','
            << fmt_double(inter / tr) << ',' << fmt_double(total / tr) << ',' << fmt_double(mse / n) << ','
            << fmt_double(mae / n) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

inline double mean_final_mse(const fed::TrainOutcome& outcome) {
    const auto& last = outcome.rounds.back();
    double s = 0.0;
    for (const auto& c : last.clients) s += c.mse;
    return s / static_cast<double>(last.clients.size());
}

inline double mean_final_mae(const fed::TrainOutcome& outcome) {
    const auto& last = outcome.rounds.back();
    double s = 0.0;
    for (const auto& c : last.clients) s += c.mae;
    return s / static_cast<double>(last.clients.size());
}

}  // namespace fuels::io
