#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "flsim/orchestrator.hpp"

namespace flsim {

namespace {

struct LogSink {
    std::ostream& out;
    bool quiet = false;
    bool json = false;

    void info(const std::string& event, const std::string& message) const {
        if (quiet) return;
        if (json) {
            nlohmann::json j{{"event", event}, {"message", message}};
            out << j.dump() << '\n';
        } else {
            out << message << '\n';
        }
    }
};

// Relative output paths land under FLSIM_OUTPUT_ROOT when it is set.
std::string resolve_output(const std::string& path) {
    if (path.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    const char* root = std::getenv("FLSIM_OUTPUT_ROOT");
    if (!root || !*root) return path;
    return (std::filesystem::path(root) / p).string();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& policy,
            const std::optional<std::uint64_t>& seed, const std::optional<int>& rounds,
            const std::optional<std::string>& out_dir, const LogSink& log, std::ostream& err) {
    FLRunConfig cfg;
    try {
        cfg = load_config_file(config_path);
        if (policy) {
            auto p = policy_from_name(*policy);
            if (!p) throw ConfigError({"policy must be one of random|full|flash-rl, got '" + *policy + "'"});
            cfg.policy = *p;
        }
        if (seed) cfg.seed = *seed;
        if (rounds) {
            if (*rounds < 0) throw ConfigError({"total_rounds must be >= 0"});
            cfg.total_rounds = *rounds;
        }
        if (out_dir) cfg.out_dir = *out_dir;
        if (cfg.out_dir.empty()) {
            cfg.out_dir = "run-" + policy_name(cfg.policy) + "-seed" + std::to_string(cfg.seed);
        }
        cfg.out_dir = resolve_output(cfg.out_dir);
    } catch (const ConfigError& e) {
        err << "configuration errors in " << config_path << ":\n";
        for (const auto& p : e.problems) err << "  - " << p << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return 2;
    }

    try {
        log.info("run_start", "running " + policy_name(cfg.policy) + " for " +
                                  std::to_string(cfg.total_rounds) + " rounds (seed " +
                                  std::to_string(cfg.seed) + ") -> " + cfg.out_dir);
        auto records = run_simulation(cfg);
        if (!records.empty()) {
            const auto& last = records.back();
            log.info("run_done", "final accuracy " + fmt(last.global_accuracy) + ", macro-F1 " +
                                     fmt(last.global_macro_f1) + ", cumulative latency " +
                                     fmt(last.cumulative_latency_s, 6) + " s");
        } else {
            log.info("run_done", "no rounds executed; wrote manifest only");
        }
        log.info("outputs", "metrics: " + cfg.out_dir + "/metrics.csv, manifest: " + cfg.out_dir +
                                "/manifest.json");
        return 0;
    } catch (const std::exception& e) {
        err << "run failed: " << e.what() << '\n';
        return 1;
    }
}

int cmd_partition(const std::string& config_path, const std::optional<std::string>& out_dir,
                  const LogSink& log, std::ostream& err) {
    FLRunConfig cfg;
    try {
        cfg = load_config_file(config_path);
        if (out_dir) cfg.out_dir = *out_dir;
        if (cfg.out_dir.empty()) cfg.out_dir = "partition-seed" + std::to_string(cfg.seed);
        cfg.out_dir = resolve_output(cfg.out_dir);
    } catch (const ConfigError& e) {
        err << "configuration errors in " << config_path << ":\n";
        for (const auto& p : e.problems) err << "  - " << p << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return 2;
    }

    try {
        cfg.total_rounds = 0;
        cfg.policy = PolicyKind::Random;  // plan and profiles are policy-independent
        Simulation sim(cfg);
        const auto& plan = sim.plan();
        write_text_atomic(cfg.out_dir + "/partition.json", plan.to_json().dump(2) + "\n");

        // per-client label histogram, aligned text
        std::ostringstream table;
        {
            const auto ds_hist = sim.partition_histogram();
            int num_labels = static_cast<int>(ds_hist.empty() ? 0 : ds_hist.front().size());
            table << std::setw(6) << "client" << std::setw(8) << "size";
            for (int c = 0; c < num_labels; ++c) table << std::setw(7) << ("L" + std::to_string(c));
            table << std::setw(9) << "labels" << '\n';
            for (std::size_t k = 0; k < ds_hist.size(); ++k) {
                int size = 0, distinct = 0;
                for (int v : ds_hist[k]) {
                    size += v;
                    if (v > 0) ++distinct;
                }
                table << std::setw(6) << k << std::setw(8) << size;
                for (int v : ds_hist[k]) table << std::setw(7) << v;
                table << std::setw(9) << distinct << '\n';
            }
        }
        write_text_atomic(cfg.out_dir + "/label_histogram.txt", table.str());
        log.info("partition_done", "scheme " + plan.scheme + ", " +
                                       std::to_string(plan.assignments.size()) + " clients -> " +
                                       cfg.out_dir + "/partition.json");
        if (!log.quiet && !log.json) log.out << table.str();
        return 0;
    } catch (const std::exception& e) {
        err << "partition failed: " << e.what() << '\n';
        return 2;
    }
}

int cmd_compare(const std::vector<std::string>& run_dirs, const std::vector<double>& targets,
                const std::string& metric, const std::optional<std::string>& out_file,
                const LogSink& log, std::ostream& err) {
    if (run_dirs.size() < 2) {
        err << "compare needs at least two run directories\n";
        return 2;
    }
    if (metric != "accuracy" && metric != "macro_f1") {
        err << "metric must be accuracy|macro_f1\n";
        return 2;
    }

    struct Row {
        std::string dir;
        std::string policy;
        int rounds = 0;
        double final_accuracy = 0.0;
        double final_f1 = 0.0;
        double cumulative_latency = 0.0;
        std::vector<std::optional<int>> to_target;
    };
    std::vector<Row> rows;
    try {
        for (const auto& dir : run_dirs) {
            Row r;
            r.dir = dir;
            auto records = metrics_from_csv_file(dir + "/metrics.csv");
            if (records.empty()) throw std::runtime_error("no rounds recorded in " + dir);
            std::ifstream mf(dir + "/manifest.json");
            if (mf) {
                auto manifest = nlohmann::json::parse(mf, nullptr, false);
                if (!manifest.is_discarded() && manifest.contains("config")) {
                    r.policy = manifest["config"].value("policy", "?");
                }
            }
            r.rounds = records.back().round;
            r.final_accuracy = records.back().global_accuracy;
            r.final_f1 = records.back().global_macro_f1;
            r.cumulative_latency = records.back().cumulative_latency_s;
            for (double t : targets) r.to_target.push_back(rounds_to_target(records, metric, t));
            rows.push_back(std::move(r));
        }
    } catch (const std::exception& e) {
        err << "compare failed: " << e.what() << '\n';
        return 2;
    }

    double base_latency = rows.front().cumulative_latency;
    std::ostringstream csv;
    csv << "run_dir,policy,rounds,final_accuracy,final_macro_f1,cumulative_latency_s,"
           "latency_reduction_pct";
    for (double t : targets) csv << ",rounds_to_" << metric << "_" << t;
    csv << '\n';

    std::ostringstream text;
    text << std::left << std::setw(28) << "run" << std::setw(10) << "policy" << std::setw(8)
         << "rounds" << std::setw(12) << "final_acc" << std::setw(12) << "final_f1" << std::setw(16)
         << "cum_latency_s" << std::setw(14) << "lat_reduct_%";
    for (double t : targets) text << std::setw(14) << ("to_" + fmt(t, 2));
    text << '\n';

    for (const auto& r : rows) {
        double reduction = base_latency > 0.0
                               ? (base_latency - r.cumulative_latency) / base_latency * 100.0
                               : 0.0;
        csv << r.dir << ',' << r.policy << ',' << r.rounds << ',' << r.final_accuracy << ','
            << r.final_f1 << ',' << r.cumulative_latency << ',' << reduction;
        text << std::left << std::setw(28) << r.dir << std::setw(10) << r.policy << std::setw(8)
             << r.rounds << std::setw(12) << fmt(r.final_accuracy) << std::setw(12)
             << fmt(r.final_f1) << std::setw(16) << fmt(r.cumulative_latency, 6) << std::setw(14)
             << fmt(reduction, 2);
        for (const auto& tt : r.to_target) {
            csv << ',' << (tt ? std::to_string(*tt) : "never");
            text << std::setw(14) << (tt ? std::to_string(*tt) : "never");
        }
        csv << '\n';
        text << '\n';
    }

    log.out << text.str();
    if (out_file) {
        try {
            write_text_atomic(resolve_output(*out_file), csv.str());
        } catch (const std::exception& e) {
            err << "cannot write comparison CSV: " << e.what() << '\n';
            return 1;
        }
    }
    return 0;
}

int cmd_inspect(const std::string& checkpoint_path, const LogSink& log, std::ostream& err) {
    try {
        std::ifstream in(checkpoint_path);
        if (!in) throw std::runtime_error("cannot open " + checkpoint_path);
        auto j = nlohmann::json::parse(in);
        std::ostringstream os;
        os << "checkpoint: " << checkpoint_path << '\n';
        os << "  round: " << j.value("round", -1) << '\n';
        if (j.contains("global_params")) {
            os << "  global params: " << j["global_params"].size() << " values\n";
        }
        if (j.contains("ledger") && j["ledger"].is_object()) {
            double mn = 1e300, mx = -1e300, sum = 0.0;
            std::size_t n = 0;
            for (const auto& [k, v] : j["ledger"].items()) {
                double x = v.get<double>();
                mn = std::min(mn, x);
                mx = std::max(mx, x);
                sum += x;
                ++n;
            }
            if (n > 0) {
                os << "  ledger: " << n << " clients, psi min/mean/max = " << fmt(mn, 6) << " / "
                   << fmt(sum / static_cast<double>(n), 6) << " / " << fmt(mx, 6) << '\n';
            }
        }
        if (j.contains("agent") && !j["agent"].is_null()) {
            const auto& a = j["agent"];
            os << "  agent: step_counter " << a.value("step_counter", -1LL);
            if (a.contains("main")) {
                os << ", q-net " << a["main"].value("input_dim", 0) << "->"
                   << a["main"].value("hidden_dim", 0) << "->" << a["main"].value("output_dim", 0);
            }
            if (a.contains("projector")) {
                os << ", pca " << a["projector"].value("dim", 0) << "->"
                   << a["projector"].value("k_pca", 0);
            }
            os << '\n';
            if (a.contains("epsilon")) {
                os << "  epsilon: " << a["epsilon"].value("init", 0.0) << " -> "
                   << a["epsilon"].value("end", 0.0) << " over "
                   << a["epsilon"].value("decay_rounds", 0) << " rounds, at round "
                   << a["epsilon"].value("round", 0) << '\n';
            }
        } else {
            os << "  agent: none (baseline policy)\n";
        }
        log.out << os.str();
        return 0;
    } catch (const std::exception& e) {
        err << "inspect failed: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Seeded federated-learning simulator with DDQL client selection"};
    app.require_subcommand(1);

    bool quiet = false, json_logs = false;
    app.add_flag("--quiet", quiet, "suppress informational output");
    app.add_flag("--json-logs", json_logs, "emit log lines as JSON objects");

    std::string config_path;
    std::optional<std::string> policy, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> rounds;

    auto* run = app.add_subcommand("run", "execute an FL simulation");
    run->fallthrough();
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--policy", policy, "selection policy: random|full|flash-rl");
    run->add_option("--seed", seed, "master seed override");
    run->add_option("--rounds", rounds, "total rounds override");
    run->add_option("--out", out_dir, "output directory");

    auto* part = app.add_subcommand("partition", "write the partition plan and label histogram");
    part->fallthrough();
    part->add_option("--config", config_path, "JSON config file")->required();
    part->add_option("--out", out_dir, "output directory");

    std::vector<std::string> run_dirs;
    std::vector<double> targets;
    std::string metric = "accuracy";
    std::optional<std::string> compare_out;
    auto* cmp = app.add_subcommand("compare", "compare completed runs");
    cmp->fallthrough();
    cmp->add_option("dirs", run_dirs, "run directories (>= 2)")->expected(-1);
    cmp->add_option("--target", targets, "target metric values for rounds-to-target");
    cmp->add_option("--metric", metric, "accuracy|macro_f1");
    cmp->add_option("--out", compare_out, "comparison CSV path");

    std::string checkpoint_path;
    auto* ins = app.add_subcommand("inspect", "print a checkpoint summary");
    ins->fallthrough();
    ins->add_option("checkpoint", checkpoint_path, "checkpoint JSON file")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return 2;
    }

    LogSink log{out, quiet, json_logs};
    if (app.got_subcommand(run)) return cmd_run(config_path, policy, seed, rounds, out_dir, log, err);
    if (app.got_subcommand(part)) return cmd_partition(config_path, out_dir, log, err);
    if (app.got_subcommand(cmp)) return cmd_compare(run_dirs, targets, metric, compare_out, log, err);
    if (app.got_subcommand(ins)) return cmd_inspect(checkpoint_path, log, err);
    err << "no subcommand given\n";
    return 2;
}

}  // namespace flsim
