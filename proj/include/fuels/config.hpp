#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "json.hpp"

#include "fuels/error.hpp"
#include "fuels/prototypes.hpp"

namespace fuels {

struct NoiseConfig {
    proto::NoiseKind kind = proto::NoiseKind::kGaussian;
    double scale = 0.0;
};

// One experiment, fully specified. Defaults reproduce the reference
// hyperparameters; every field can be overridden from JSON or CLI flags.
struct ExperimentConfig {
    std::string method = "fuels";  // fuels | solo | fedavg | fedprox | fedrep
    std::size_t clients = 100;     // N
    std::size_t clusters = 4;      // synthetic generator clusters
    std::size_t series_length = 1440;  // K
    std::size_t batch_size = 24;   // B
    std::size_t closeness_window = 3;  // c
    std::size_t periodic_window = 3;   // q
    std::size_t period = 24;       // p
    std::size_t hidden_size = 128; // h per GRU; representation width is 2h
    double tau = 0.02;
    double rho = 5.0;
    double beta_percentile = 50.0;
    double alpha = 1.0;            // selection ratio
    std::size_t rounds = 200;      // T
    std::size_t epochs = 1;
    double learning_rate = 0.001;
    std::size_t shift = 1;         // temporal augmentation shift s
    std::optional<NoiseConfig> noise;  // prototype privacy noise
    std::uint64_t seed = 1;
    std::string data_csv;          // empty: synthetic data
    std::string out_dir;           // empty: timestamped directory
    // Ablation switches; all true/periodicity for full FUELS.
    bool use_intra = true;
    bool use_inter = true;
    bool learn_filter = true;
    std::string prototype_mode = "periodicity";  // periodicity | concat
    // Method/runtime knobs.
    double fedprox_mu = 0.01;
    std::size_t threads = 1;       // 0: hardware concurrency
    bool distribute_all = true;    // downlink to every client vs selected only
    double synth_noise = 0.25;     // generator noise stddev

    std::size_t repr_dim() const { return 2 * hidden_size; }
};

inline void validate(const ExperimentConfig& c) {
    static const std::set<std::string> methods{"fuels", "solo", "fedavg", "fedprox", "fedrep"};
    if (!methods.count(c.method)) throw ValidationError("method: unknown method '" + c.method + "'");
    if (c.prototype_mode != "periodicity" && c.prototype_mode != "concat")
        throw ValidationError("prototype_mode: must be 'periodicity' or 'concat'");
    if (c.clients < 1) throw ValidationError("clients: must be >= 1");
    if (c.clusters < 1) throw ValidationError("clusters: must be >= 1");
    if (c.data_csv.empty() && c.clients < c.clusters)
        throw ValidationError("clients: need at least one client per cluster");
    if (c.batch_size < 1) throw ValidationError("batch_size: must be >= 1");
    if (c.closeness_window < 1) throw ValidationError("closeness_window: must be >= 1");
    if (c.periodic_window < 1) throw ValidationError("periodic_window: must be >= 1");
    if (c.period < 1) throw ValidationError("period: must be >= 1");
    if (c.hidden_size < 1) throw ValidationError("hidden_size: must be >= 1");
    if (c.tau <= 0.0) throw ValidationError("tau: must be positive");
    if (c.rho < 0.0) throw ValidationError("rho: must be >= 0");
    if (c.beta_percentile < 0.0 || c.beta_percentile > 100.0)
        throw ValidationError("beta_percentile: must lie in [0, 100]");
    if (c.alpha <= 0.0 || c.alpha > 1.0) throw ValidationError("alpha: must lie in (0, 1]");
    if (c.rounds < 1) throw ValidationError("rounds: must be >= 1");
    if (c.epochs < 1) throw ValidationError("epochs: must be >= 1");
    if (c.learning_rate <= 0.0) throw ValidationError("learning_rate: must be positive");
    if (c.fedprox_mu < 0.0) throw ValidationError("fedprox_mu: must be >= 0");
    if (c.synth_noise < 0.0) throw ValidationError("synth_noise: must be >= 0");
    if (c.noise && c.noise->scale < 0.0) throw ValidationError("noise.scale: must be >= 0");
    std::size_t history = std::max(c.closeness_window, c.periodic_window * c.period) + c.shift;
    if (c.data_csv.empty() && c.series_length <= history + 1)
        throw ValidationError("series_length: too short for the configured windows");
    // Periodicity-aware prototypes assume batches that span one full cycle.
    if (c.prototype_mode == "periodicity" && c.batch_size != c.period)
        throw ValidationError("batch_size: must equal period when prototype_mode is 'periodicity'");
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j{
        {"method", c.method},
        {"clients", c.clients},
        {"clusters", c.clusters},
        {"series_length", c.series_length},
        {"batch_size", c.batch_size},
        {"closeness_window", c.closeness_window},
        {"periodic_window", c.periodic_window},
        {"period", c.period},
        {"hidden_size", c.hidden_size},
        {"tau", c.tau},
        {"rho", c.rho},
        {"beta_percentile", c.beta_percentile},
        {"alpha", c.alpha},
        {"rounds", c.rounds},
        {"epochs", c.epochs},
        {"learning_rate", c.learning_rate},
        {"shift", c.shift},
        {"seed", c.seed},
        {"data_csv", c.data_csv},
        {"out_dir", c.out_dir},
        {"use_intra", c.use_intra},
        {"use_inter", c.use_inter},
        {"learn_filter", c.learn_filter},
        {"prototype_mode", c.prototype_mode},
        {"fedprox_mu", c.fedprox_mu},
        {"threads", c.threads},
        {"distribute_all", c.distribute_all},
        {"synth_noise", c.synth_noise},
    };
    if (c.noise)
        j["noise"] = {{"kind", proto::noise_kind_name(c.noise->kind)}, {"scale", c.noise->scale}};
    return j;
}

// Strict parse: unknown keys are errors, known keys overwrite defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("config: expected a JSON object");
    ExperimentConfig c;
    static const std::set<std::string> known{
        "method", "clients", "clusters", "series_length", "batch_size", "closeness_window",
        "periodic_window", "period", "hidden_size", "tau", "rho", "beta_percentile", "alpha",
        "rounds", "epochs", "learning_rate", "shift", "noise", "seed", "data_csv", "out_dir",
        "use_intra", "use_inter", "learn_filter", "prototype_mode", "fedprox_mu", "threads",
        "distribute_all", "synth_noise"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.count(key)) throw ValidationError("config: unknown key '" + key + "'");
    }
    try {
        if (j.contains("method")) c.method = j.at("method").get<std::string>();
        if (j.contains("clients")) c.clients = j.at("clients").get<std::size_t>();
        if (j.contains("clusters")) c.clusters = j.at("clusters").get<std::size_t>();
        if (j.contains("series_length")) c.series_length = j.at("series_length").get<std::size_t>();
        if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
        if (j.contains("closeness_window")) c.closeness_window = j.at("closeness_window").get<std::size_t>();
        if (j.contains("periodic_window")) c.periodic_window = j.at("periodic_window").get<std::size_t>();
        if (j.contains("period")) c.period = j.at("period").get<std::size_t>();
        if (j.contains("hidden_size")) c.hidden_size = j.at("hidden_size").get<std::size_t>();
        if (j.contains("tau")) c.tau = j.at("tau").get<double>();
        if (j.contains("rho")) c.rho = j.at("rho").get<double>();
        if (j.contains("beta_percentile")) c.beta_percentile = j.at("beta_percentile").get<double>();
        if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
        if (j.contains("rounds")) c.rounds = j.at("rounds").get<std::size_t>();
        if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
        if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
        if (j.contains("shift")) c.shift = j.at("shift").get<std::size_t>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("data_csv")) c.data_csv = j.at("data_csv").get<std::string>();
        if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("use_intra")) c.use_intra = j.at("use_intra").get<bool>();
        if (j.contains("use_inter")) c.use_inter = j.at("use_inter").get<bool>();
        if (j.contains("learn_filter")) c.learn_filter = j.at("learn_filter").get<bool>();
        if (j.contains("prototype_mode")) c.prototype_mode = j.at("prototype_mode").get<std::string>();
        if (j.contains("fedprox_mu")) c.fedprox_mu = j.at("fedprox_mu").get<double>();
        if (j.contains("threads")) c.threads = j.at("threads").get<std::size_t>();
        if (j.contains("distribute_all")) c.distribute_all = j.at("distribute_all").get<bool>();
        if (j.contains("synth_noise")) c.synth_noise = j.at("synth_noise").get<double>();
        if (j.contains("noise") && !j.at("noise").is_null()) {
            const auto& n = j.at("noise");
            for (const auto& [key, value] : n.items()) {
                (void)value;
                if (key != "kind" && key != "scale") throw ValidationError("config: unknown key 'noise." + key + "'");
            }
            NoiseConfig nc;
            nc.kind = proto::noise_kind_from(n.at("kind").get<std::string>());
            nc.scale = n.at("scale").get<double>();
            c.noise = nc;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    validate(c);
    return c;
}

inline ExperimentConfig config_from_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

}  // namespace fuels
