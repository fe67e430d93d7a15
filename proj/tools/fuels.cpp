#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fuels/baselines.hpp"
#include "fuels/config.hpp"
#include "fuels/data.hpp"
#include "fuels/error.hpp"
#include "fuels/federation.hpp"
#include "fuels/gradcheck.hpp"
#include "fuels/serialize.hpp"

// Experiment driver. Exit codes: 0 success, 1 usage error, 2 validation
// error, 3 runtime/numeric error.

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct ConfigOpts {
    std::string config_path;
    std::vector<std::string> sets;  // key=value overrides, applied in order
};

void add_config_options(CLI::App* cmd, ConfigOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file (defaults used when omitted)");
    cmd->add_option("--set", opts.sets,
                    "Override a config key, e.g. --set seed=7 --set noise.kind=gaussian (repeatable)");
}

json parse_set_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text);  // bare strings need no quoting
    }
}

fuels::ExperimentConfig load_config(const ConfigOpts& opts) {
    json j = json::object();
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw fuels::IoError("cannot open config file: " + opts.config_path);
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw fuels::ParseError(std::string("config: ") + e.what());
        }
    }
    for (const std::string& s : opts.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw fuels::ValidationError("--set expects key=value, got '" + s + "'");
        std::string key = s.substr(0, eq);
        json value = parse_set_value(s.substr(eq + 1));
        auto dot = key.find('.');
        if (dot == std::string::npos) {
            j[key] = value;
        } else {
            j[key.substr(0, dot)][key.substr(dot + 1)] = value;
        }
    }
    return fuels::config_from_json(j);
}

std::string utc_stamp() {
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

// Every run writes into one directory: --out / config out_dir, else a
// timestamped directory under $FUELS_LOG_DIR or ./runs.
fs::path resolve_out_dir(fuels::ExperimentConfig& cfg, const std::string& flag_out) {
    fs::path dir;
    if (!flag_out.empty()) {
        dir = flag_out;
    } else if (!cfg.out_dir.empty()) {
        dir = cfg.out_dir;
    } else {
        const char* env = std::getenv("FUELS_LOG_DIR");
        fs::path base = env && *env ? fs::path(env) : fs::path("runs");
        dir = base / (utc_stamp() + "-" + cfg.method + "-seed" + std::to_string(cfg.seed));
    }
    cfg.out_dir = dir.string();
    fs::create_directories(dir);
    return dir;
}

fuels::fed::TrainOutcome run_any(const fuels::ExperimentConfig& cfg) {
    return cfg.method == "fuels" ? fuels::fed::run_training(cfg) : fuels::baselines::run_baseline(cfg);
}

void write_run_artifacts(const fs::path& dir, const fuels::ExperimentConfig& cfg,
                         fuels::fed::TrainOutcome& outcome) {
    {
        std::ofstream out(dir / "config.json");
        if (!out) throw fuels::IoError("cannot write config.json");
        out << fuels::to_json(cfg).dump(1) << '\n';
    }
    fuels::io::write_rounds_jsonl((dir / "rounds.jsonl").string(), outcome.rounds);
    fuels::io::write_metrics_csv((dir / "metrics.csv").string(), outcome.rounds.back());
    fuels::io::write_cdf_csv((dir / "cdf.csv").string(), outcome.rounds.back());
    fuels::io::write_loss_curve_csv((dir / "loss_curve.csv").string(), outcome.rounds);
    fuels::io::save_models((dir / "models.json").string(), outcome.clients, cfg.hidden_size, cfg.batch_size);
    {
        auto acc = fuels::fed::comm_accounting(cfg);
        std::ofstream out(dir / "accounting.csv");
        if (!out) throw fuels::IoError("cannot write accounting.csv");
        out << "method,uplink_per_client,downlink_per_client,model_params,encoder_params\n";
        out << acc.method << ',' << acc.uplink_per_client << ',' << acc.downlink_per_client << ','
            << acc.model_params << ',' << acc.encoder_params << '\n';
    }
    if (cfg.method == "fuels") {
        std::ofstream out(dir / "prototypes.bin", std::ios::binary);
        if (!out) throw fuels::IoError("cannot write prototypes.bin");
        for (std::size_t i = 0; i < outcome.server.registry.size(); ++i)
            if (outcome.server.have[i]) fuels::proto::write_prototype(out, outcome.server.registry[i]);
    }
}

int cmd_gen_data(const ConfigOpts& opts, const std::string& out_path) {
    fuels::ExperimentConfig cfg = load_config(opts);
    auto series = fuels::data::generate_synthetic(cfg.clients, cfg.clusters, cfg.series_length, cfg.period,
                                                  cfg.seed, cfg.synth_noise);
    fuels::data::write_csv(out_path, series);
    std::printf("wrote %zu clients x %zu stamps to %s\n", series.size(), cfg.series_length, out_path.c_str());
    return 0;
}

int cmd_train(const ConfigOpts& opts, const std::string& flag_out) {
    fuels::ExperimentConfig cfg = load_config(opts);
    fs::path dir = resolve_out_dir(cfg, flag_out);
    auto outcome = run_any(cfg);
    write_run_artifacts(dir, cfg, outcome);
    std::printf("%s: %zu rounds, mean test MSE %.6f, mean test MAE %.6f\n", cfg.method.c_str(), cfg.rounds,
                fuels::io::mean_final_mse(outcome), fuels::io::mean_final_mae(outcome));
    std::printf("artifacts in %s\n", dir.string().c_str());
    return 0;
}

int cmd_evaluate(const ConfigOpts& opts, const std::string& models_path, const std::string& out_path) {
    fuels::ExperimentConfig cfg = load_config(opts);
    auto clients = fuels::fed::build_clients(cfg);
    auto loaded = fuels::io::load_models(models_path);
    for (auto& [id, mdl] : loaded) {
        if (id < 0 || static_cast<std::size_t>(id) >= clients.size())
            throw fuels::ValidationError("checkpoint client id " + std::to_string(id) + " outside config range");
        clients[static_cast<std::size_t>(id)].mdl = std::move(mdl);
    }
    std::string csv = "client_id,mse,mae\n";
    for (auto& st : clients) {
        auto [mse, mae] = fuels::fed::evaluate(st.mdl, st.test);
        csv += std::to_string(st.id) + "," + fuels::io::fmt_double(mse) + "," + fuels::io::fmt_double(mae) + "\n";
    }
    if (out_path.empty()) {
        std::fputs(csv.c_str(), stdout);
    } else {
        std::ofstream out(out_path);
        if (!out) throw fuels::IoError("cannot write " + out_path);
        out << csv;
    }
    return 0;
}

int cmd_report(const std::string& run_dir) {
    fs::path dir(run_dir);
    auto rounds = fuels::io::read_rounds_jsonl((dir / "rounds.jsonl").string());
    if (rounds.empty()) throw fuels::ValidationError("report: rounds.jsonl holds no rounds");
    fuels::io::write_cdf_csv((dir / "cdf.csv").string(), rounds.back());
    fuels::io::write_loss_curve_csv((dir / "loss_curve.csv").string(), rounds);
    std::printf("wrote %s and %s\n", (dir / "cdf.csv").string().c_str(), (dir / "loss_curve.csv").string().c_str());
    return 0;
}

int cmd_ablate(const ConfigOpts& opts, const std::string& flag_out) {
    fuels::ExperimentConfig base = load_config(opts);
    if (base.method != "fuels")
        throw fuels::ValidationError("ablate: method must be 'fuels' (variants are derived from it)");
    fs::path dir = resolve_out_dir(base, flag_out);
    struct Variant {
        const char* name;
        void (*apply)(fuels::ExperimentConfig&);
    };
    const Variant variants[] = {
        {"fuels", [](fuels::ExperimentConfig&) {}},
        {"no_inter", [](fuels::ExperimentConfig& c) { c.use_inter = false; }},
        {"no_intra", [](fuels::ExperimentConfig& c) { c.use_intra = false; }},
        {"no_w", [](fuels::ExperimentConfig& c) { c.learn_filter = false; }},
        {"no_paware", [](fuels::ExperimentConfig& c) { c.prototype_mode = "concat"; }},
    };
    std::ofstream table(dir / "ablation.csv");
    if (!table) throw fuels::IoError("cannot write ablation.csv");
    table << "variant,mean_mse,mean_mae,uplink_per_client\n";
    for (const auto& v : variants) {
        fuels::ExperimentConfig cfg = base;
        v.apply(cfg);
        cfg.out_dir = (dir / v.name).string();
        fs::create_directories(cfg.out_dir);
        auto outcome = run_any(cfg);
        write_run_artifacts(cfg.out_dir, cfg, outcome);
        auto acc = fuels::fed::comm_accounting(cfg);
        table << v.name << ',' << fuels::io::fmt_double(fuels::io::mean_final_mse(outcome)) << ','
              << fuels::io::fmt_double(fuels::io::mean_final_mae(outcome)) << ',' << acc.uplink_per_client << '\n';
        std::printf("%-10s mean MSE %.6f\n", v.name, fuels::io::mean_final_mse(outcome));
    }
    std::printf("ablation table in %s\n", (dir / "ablation.csv").string().c_str());
    return 0;
}

int cmd_check_grad(std::uint64_t seed, std::size_t instances) {
    auto res = fuels::gradcheck::run_suite(seed, instances);
    std::printf("check-grad: %zu instances, max relative error %.3g (worst: %s)\n", res.instances,
                res.max_rel_error, res.worst.empty() ? "-" : res.worst.c_str());
    if (!res.ok()) {
        std::fprintf(stderr, "gradient check FAILED (tolerance 1e-5)\n");
        return 3;
    }
    std::printf("gradient check passed\n");
    return 0;
}

int cmd_theory(const fuels::fed::TheoryParams& p) {
    double t = fuels::fed::theory_round_bound(p);
    std::printf("rounds_bound=%.12g\n", t);
    auto eta = fuels::fed::theory_lr_bound(p);
    if (eta) {
        std::printf("eta_bound=%.12g\n", *eta);
    } else {
        std::printf("eta_bound=none (no feasible learning rate)\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FUELS: dual semantic-alignment contrastive personalized federated forecasting"};
    app.require_subcommand(1);

    ConfigOpts gen_opts;
    std::string gen_out = "traffic.csv";
    auto* gen = app.add_subcommand("gen-data", "Generate synthetic heterogeneous traffic CSV");
    add_config_options(gen, gen_opts);
    gen->add_option("--out", gen_out, "Output CSV path");

    ConfigOpts train_opts;
    std::string train_out;
    auto* train = app.add_subcommand("train", "Run one training experiment and write artifacts");
    add_config_options(train, train_opts);
    train->add_option("--out", train_out, "Artifact directory (default: timestamped)");

    ConfigOpts eval_opts;
    std::string eval_models, eval_out;
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a model checkpoint on the configured data");
    add_config_options(evaluate, eval_opts);
    evaluate->add_option("--models", eval_models, "models.json checkpoint")->required();
    evaluate->add_option("--out", eval_out, "Metrics CSV path (stdout when omitted)");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "Regenerate CDF and loss-curve CSVs from rounds.jsonl");
    report->add_option("--run", report_dir, "Run directory")->required();

    ConfigOpts ablate_opts;
    std::string ablate_out;
    auto* ablate = app.add_subcommand("ablate", "Run the four ablation variants next to full FUELS");
    add_config_options(ablate, ablate_opts);
    ablate->add_option("--out", ablate_out, "Artifact directory (default: timestamped)");

    std::uint64_t grad_seed = 7;
    std::size_t grad_instances = 20;
    auto* check = app.add_subcommand("check-grad", "Finite-difference self-check of the training gradients");
    check->add_option("--seed", grad_seed, "Base seed");
    check->add_option("--instances", grad_instances, "Instance count");

    fuels::fed::TheoryParams tp;
    auto* theory = app.add_subcommand("theory", "Evaluate the convergence-rate calculators");
    theory->add_option("--lambda", tp.loss_gap, "Initial-to-optimal loss gap");
    theory->add_option("--xi", tp.target, "Target mean squared gradient norm");
    theory->add_option("--iterations", tp.local_iters, "Local iterations I");
    theory->add_option("--eta", tp.lr, "Learning rate");
    theory->add_option("--l1", tp.smoothness, "Smoothness constant L1");
    theory->add_option("--lh", tp.lipschitz, "Lipschitz constant L_h");
    theory->add_option("--clients", tp.clients, "Client count N");
    theory->add_option("--alpha", tp.alpha, "Selection ratio");
    theory->add_option("--rho", tp.rho, "Inter-loss weight");
    theory->add_option("--g", tp.grad_bound, "Gradient norm bound G");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_opts, gen_out);
        if (train->parsed()) return cmd_train(train_opts, train_out);
        if (evaluate->parsed()) return cmd_evaluate(eval_opts, eval_models, eval_out);
        if (report->parsed()) return cmd_report(report_dir);
        if (ablate->parsed()) return cmd_ablate(ablate_opts, ablate_out);
        if (check->parsed()) return cmd_check_grad(grad_seed, grad_instances);
        if (theory->parsed()) return cmd_theory(tp);
    } catch (const fuels::ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const fuels::ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return 2;
    } catch (const fuels::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 1;
}
