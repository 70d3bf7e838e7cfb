#include "flsim/config.hpp"

#include <fstream>
#include <sstream>

namespace flsim {

namespace {

// Pulls doc[key] if present, otherwise keeps the default and records the path.
template <class T>
void take(const nlohmann::json& doc, const char* section, const char* key, T& out,
          std::vector<std::string>& defaulted) {
    std::string path = section[0] ? std::string(section) + "." + key : key;
    if (doc.contains(key)) {
        doc.at(key).get_to(out);
    } else {
        defaulted.push_back(path);
    }
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::ostringstream os;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) os << sep;
        os << parts[i];
    }
    return os.str();
}

}  // namespace

std::string policy_name(PolicyKind p) {
    switch (p) {
        case PolicyKind::Random: return "random";
        case PolicyKind::FullParticipation: return "full";
        case PolicyKind::FlashRL: return "flash-rl";
    }
    return "?";
}

std::optional<PolicyKind> policy_from_name(const std::string& name) {
    if (name == "random") return PolicyKind::Random;
    if (name == "full") return PolicyKind::FullParticipation;
    if (name == "flash-rl") return PolicyKind::FlashRL;
    return std::nullopt;
}

ConfigError::ConfigError(std::vector<std::string> probs)
    : std::runtime_error("invalid configuration:\n  - " + join(probs, "\n  - ")),
      problems(std::move(probs)) {}

FLRunConfig parse_config(const nlohmann::json& doc) {
    FLRunConfig cfg;
    auto& d = cfg.defaulted;
    std::vector<std::string> problems;

    for (const char* required : {"num_clients", "clients_per_round", "total_rounds"}) {
        if (!doc.contains(required)) {
            problems.push_back(std::string("missing required field: ") + required);
        }
    }

    take(doc, "", "num_clients", cfg.num_clients, d);
    take(doc, "", "clients_per_round", cfg.clients_per_round, d);
    take(doc, "", "total_rounds", cfg.total_rounds, d);
    take(doc, "", "seed", cfg.seed, d);
    take(doc, "", "validation_fraction", cfg.validation_fraction, d);
    take(doc, "", "checkpoint_every", cfg.checkpoint_every, d);
    take(doc, "", "out_dir", cfg.out_dir, d);

    std::string policy = "flash-rl";
    take(doc, "", "policy", policy, d);
    if (auto p = policy_from_name(policy)) {
        cfg.policy = *p;
    } else {
        problems.push_back("policy must be one of random|full|flash-rl, got '" + policy + "'");
    }

    nlohmann::json local = doc.value("local", nlohmann::json::object());
    if (!doc.contains("local")) d.push_back("local");
    take(local, "local", "epochs", cfg.local_epochs, d);
    take(local, "local", "batch_size", cfg.local_batch_size, d);
    take(local, "local", "learning_rate", cfg.learning_rate, d);
    take(local, "local", "momentum", cfg.momentum, d);

    nlohmann::json model = doc.value("model", nlohmann::json::object());
    if (!doc.contains("model")) d.push_back("model");
    take(model, "model", "hidden_dim", cfg.model_hidden_dim, d);

    nlohmann::json ds = doc.value("dataset", nlohmann::json::object());
    if (!doc.contains("dataset")) d.push_back("dataset");
    take(ds, "dataset", "kind", cfg.dataset.kind, d);
    take(ds, "dataset", "num_classes", cfg.dataset.num_classes, d);
    take(ds, "dataset", "input_dim", cfg.dataset.input_dim, d);
    take(ds, "dataset", "n_per_class", cfg.dataset.n_per_class, d);
    take(ds, "dataset", "spread", cfg.dataset.spread, d);
    take(ds, "dataset", "bits_per_sample", cfg.dataset.bits_per_sample, d);
    take(ds, "dataset", "images", cfg.dataset.images_path, d);
    take(ds, "dataset", "labels", cfg.dataset.labels_path, d);

    nlohmann::json part = doc.value("partition", nlohmann::json::object());
    if (!doc.contains("partition")) d.push_back("partition");
    take(part, "partition", "scheme", cfg.partition.scheme, d);
    take(part, "partition", "alpha", cfg.partition.alpha, d);
    take(part, "partition", "min_size", cfg.partition.min_size, d);
    take(part, "partition", "shards_per_client", cfg.partition.shards_per_client, d);
    take(part, "partition", "labels_per_client", cfg.partition.labels_per_client, d);
    take(part, "partition", "size_jitter", cfg.partition.size_jitter, d);

    nlohmann::json hw = doc.value("hardware", nlohmann::json::object());
    if (!doc.contains("hardware")) d.push_back("hardware");
    if (hw.contains("catalog")) cfg.hardware.catalog = hw.at("catalog");
    take(hw, "hardware", "spec_pool", cfg.hardware.spec_pool, d);
    take(hw, "hardware", "protocol_pool", cfg.hardware.protocol_pool, d);
    take(hw, "hardware", "cycles_per_bit", cfg.hardware.cycles_per_bit, d);
    take(hw, "hardware", "freq_stdev_frac", cfg.hardware.freq_stdev_frac, d);
    take(hw, "hardware", "bw_stdev_frac", cfg.hardware.bw_stdev_frac, d);
    take(hw, "hardware", "bits_per_param", cfg.hardware.bits_per_param, d);
    if (hw.contains("overrides")) {
        for (const auto& [key, val] : hw.at("overrides").items()) {
            ClientHardwareOverride ov;
            if (val.contains("spec")) ov.spec_index = val.at("spec").get<int>();
            if (val.contains("protocol")) ov.protocol = val.at("protocol").get<std::string>();
            if (val.contains("cycles_per_bit")) ov.cycles_per_bit = val.at("cycles_per_bit").get<double>();
            cfg.hardware.overrides[std::stoi(key)] = std::move(ov);
        }
    }

    nlohmann::json sc = doc.value("score", nlohmann::json::object());
    if (!doc.contains("score")) d.push_back("score");
    take(sc, "score", "lambda", cfg.score.base.lambda, d);
    take(sc, "score", "alpha1", cfg.score.base.alpha1, d);
    take(sc, "score", "alpha2", cfg.score.base.alpha2, d);
    take(sc, "score", "psi_init", cfg.score.base.psi_init, d);
    take(sc, "score", "divergence_eps", cfg.score.divergence_eps, d);
    std::string mode = "utility";
    take(sc, "score", "mode", mode, d);
    if (mode == "utility") {
        cfg.score.mode = ScoreMode::Utility;
    } else if (mode == "accuracy") {
        cfg.score.mode = ScoreMode::Accuracy;
    } else {
        problems.push_back("score.mode must be utility|accuracy, got '" + mode + "'");
    }
    std::string metric = "accuracy";
    take(sc, "score", "metric", metric, d);
    if (metric == "accuracy") {
        cfg.score.metric = PerformanceMetric::Accuracy;
    } else if (metric == "macro_f1") {
        cfg.score.metric = PerformanceMetric::MacroF1;
    } else {
        problems.push_back("score.metric must be accuracy|macro_f1, got '" + metric + "'");
    }

    nlohmann::json ag = doc.value("agent", nlohmann::json::object());
    if (!doc.contains("agent")) d.push_back("agent");
    take(ag, "agent", "gamma", cfg.agent.gamma, d);
    take(ag, "agent", "rl_learning_rate", cfg.agent.rl_learning_rate, d);
    take(ag, "agent", "rl_batch_size", cfg.agent.rl_batch_size, d);
    take(ag, "agent", "sync_period", cfg.agent.sync_period, d);
    take(ag, "agent", "epsilon_init", cfg.agent.epsilon_init, d);
    take(ag, "agent", "epsilon_end", cfg.agent.epsilon_end, d);
    take(ag, "agent", "decay_rounds", cfg.agent.decay_rounds, d);
    take(ag, "agent", "k_pca", cfg.agent.k_pca, d);
    take(ag, "agent", "hidden_dim", cfg.agent.hidden_dim, d);
    take(ag, "agent", "buffer_capacity", cfg.agent.buffer_capacity, d);
    take(ag, "agent", "target_state", cfg.agent.target_state, d);

    auto more = validate_config(cfg);
    problems.insert(problems.end(), more.begin(), more.end());
    if (!problems.empty()) throw ConfigError(std::move(problems));
    return cfg;
}

FLRunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("config parse error in " + path + ": " + e.what());
    }
    return parse_config(doc);
}

std::vector<std::string> validate_config(const FLRunConfig& cfg) {
    std::vector<std::string> p;
    auto req = [&p](bool ok, const std::string& msg) {
        if (!ok) p.push_back(msg);
    };

    req(cfg.num_clients >= 2, "num_clients must be >= 2");
    req(cfg.clients_per_round >= 1, "clients_per_round must be >= 1");
    req(cfg.clients_per_round <= cfg.num_clients || cfg.num_clients < 2,
        "clients_per_round must not exceed num_clients");
    req(cfg.total_rounds >= 0, "total_rounds must be >= 0");
    req(cfg.local_epochs >= 1, "local.epochs must be >= 1");
    req(cfg.local_batch_size >= 1, "local.batch_size must be >= 1");
    req(cfg.learning_rate > 0.0, "local.learning_rate must be > 0");
    req(cfg.momentum >= 0.0 && cfg.momentum < 1.0, "local.momentum must lie in [0,1)");
    req(cfg.model_hidden_dim >= 0, "model.hidden_dim must be >= 0");
    req(cfg.validation_fraction > 0.0 && cfg.validation_fraction <= 0.5,
        "validation_fraction must lie in (0, 0.5]");
    req(cfg.checkpoint_every >= 0, "checkpoint_every must be >= 0");

    if (cfg.dataset.kind == "blobs") {
        req(cfg.dataset.num_classes >= 2, "dataset.num_classes must be >= 2");
        req(cfg.dataset.input_dim >= 1, "dataset.input_dim must be >= 1");
        req(cfg.dataset.n_per_class >= 1, "dataset.n_per_class must be >= 1");
        req(cfg.dataset.spread >= 0.0, "dataset.spread must be >= 0");
    } else if (cfg.dataset.kind == "idx") {
        req(!cfg.dataset.images_path.empty(), "dataset.images is required for kind=idx");
        req(!cfg.dataset.labels_path.empty(), "dataset.labels is required for kind=idx");
    } else {
        p.push_back("dataset.kind must be blobs|idx, got '" + cfg.dataset.kind + "'");
    }
    req(cfg.dataset.bits_per_sample >= 0, "dataset.bits_per_sample must be >= 0");

    const std::string& scheme = cfg.partition.scheme;
    if (scheme == "hetero_dirichlet") {
        req(cfg.partition.alpha > 0.0, "partition.alpha must be > 0");
        req(cfg.partition.min_size >= 1, "partition.min_size must be >= 1");
    } else if (scheme == "shards") {
        req(cfg.partition.shards_per_client >= 1, "partition.shards_per_client must be >= 1");
    } else if (scheme == "noniid_label" || scheme == "label_skew") {
        req(cfg.partition.labels_per_client >= 1, "partition.labels_per_client must be >= 1");
        req(cfg.partition.size_jitter >= 0.0 && cfg.partition.size_jitter < 1.0,
            "partition.size_jitter must lie in [0,1)");
    } else {
        p.push_back("partition.scheme must be hetero_dirichlet|shards|noniid_label|label_skew, got '" +
                    scheme + "'");
    }

    req(cfg.hardware.cycles_per_bit > 0.0, "hardware.cycles_per_bit must be > 0");
    req(cfg.hardware.freq_stdev_frac >= 0.0 && cfg.hardware.freq_stdev_frac <= 0.5,
        "hardware.freq_stdev_frac must lie in [0, 0.5]");
    req(cfg.hardware.bw_stdev_frac >= 0.0 && cfg.hardware.bw_stdev_frac <= 0.5,
        "hardware.bw_stdev_frac must lie in [0, 0.5]");
    req(cfg.hardware.bits_per_param >= 1, "hardware.bits_per_param must be >= 1");

    req(cfg.score.base.lambda >= 0.0 && cfg.score.base.lambda <= 1.0,
        "score.lambda must lie in [0,1]");
    req(cfg.score.base.alpha1 >= 0.0, "score.alpha1 must be >= 0");
    req(cfg.score.base.alpha2 >= 0.0, "score.alpha2 must be >= 0");
    req(cfg.score.base.alpha1 + cfg.score.base.alpha2 > 0.0, "score.alpha1 + score.alpha2 must be > 0");
    req(cfg.score.divergence_eps > 0.0, "score.divergence_eps must be > 0");

    req(cfg.agent.gamma >= 0.0 && cfg.agent.gamma <= 1.0, "agent.gamma must lie in [0,1]");
    req(cfg.agent.rl_learning_rate > 0.0, "agent.rl_learning_rate must be > 0");
    req(cfg.agent.rl_batch_size >= 1, "agent.rl_batch_size must be >= 1");
    req(cfg.agent.sync_period >= 1, "agent.sync_period must be >= 1");
    req(cfg.agent.epsilon_end >= 0.0 && cfg.agent.epsilon_init <= 1.0 &&
            cfg.agent.epsilon_end <= cfg.agent.epsilon_init,
        "agent epsilon must satisfy 0 <= epsilon_end <= epsilon_init <= 1");
    req(cfg.agent.decay_rounds >= 0, "agent.decay_rounds must be >= 0");
    req(cfg.agent.k_pca >= 1, "agent.k_pca must be >= 1");
    req(cfg.agent.hidden_dim >= 1, "agent.hidden_dim must be >= 1");
    req(cfg.agent.buffer_capacity >= 1, "agent.buffer_capacity must be >= 1");
    req(cfg.agent.target_state == "next" || cfg.agent.target_state == "current",
        "agent.target_state must be next|current");
    return p;
}

nlohmann::json FLRunConfig::to_json() const {
    nlohmann::json j;
    j["num_clients"] = num_clients;
    j["clients_per_round"] = clients_per_round;
    j["total_rounds"] = total_rounds;
    j["policy"] = policy_name(policy);
    j["seed"] = seed;
    j["validation_fraction"] = validation_fraction;
    j["checkpoint_every"] = checkpoint_every;
    j["out_dir"] = out_dir;
    j["local"] = {{"epochs", local_epochs},
                  {"batch_size", local_batch_size},
                  {"learning_rate", learning_rate},
                  {"momentum", momentum}};
    j["model"] = {{"hidden_dim", model_hidden_dim}};
    j["dataset"] = {{"kind", dataset.kind},           {"num_classes", dataset.num_classes},
                    {"input_dim", dataset.input_dim}, {"n_per_class", dataset.n_per_class},
                    {"spread", dataset.spread},       {"bits_per_sample", dataset.bits_per_sample},
                    {"images", dataset.images_path},  {"labels", dataset.labels_path}};
    j["partition"] = {{"scheme", partition.scheme},
                      {"alpha", partition.alpha},
                      {"min_size", partition.min_size},
                      {"shards_per_client", partition.shards_per_client},
                      {"labels_per_client", partition.labels_per_client},
                      {"size_jitter", partition.size_jitter}};
    j["hardware"] = {{"spec_pool", hardware.spec_pool},
                     {"protocol_pool", hardware.protocol_pool},
                     {"cycles_per_bit", hardware.cycles_per_bit},
                     {"freq_stdev_frac", hardware.freq_stdev_frac},
                     {"bw_stdev_frac", hardware.bw_stdev_frac},
                     {"bits_per_param", hardware.bits_per_param}};
    if (hardware.catalog) j["hardware"]["catalog"] = *hardware.catalog;
    if (!hardware.overrides.empty()) {
        nlohmann::json ov = nlohmann::json::object();
        for (const auto& [k, v] : hardware.overrides) {
            nlohmann::json e = nlohmann::json::object();
            if (v.spec_index) e["spec"] = *v.spec_index;
            if (v.protocol) e["protocol"] = *v.protocol;
            if (v.cycles_per_bit) e["cycles_per_bit"] = *v.cycles_per_bit;
            ov[std::to_string(k)] = std::move(e);
        }
        j["hardware"]["overrides"] = std::move(ov);
    }
    j["score"] = {{"lambda", score.base.lambda},
                  {"alpha1", score.base.alpha1},
                  {"alpha2", score.base.alpha2},
                  {"psi_init", score.base.psi_init},
                  {"divergence_eps", score.divergence_eps},
                  {"mode", score.mode == ScoreMode::Utility ? "utility" : "accuracy"},
                  {"metric", score.metric == PerformanceMetric::Accuracy ? "accuracy" : "macro_f1"}};
    j["agent"] = {{"gamma", agent.gamma},
                  {"rl_learning_rate", agent.rl_learning_rate},
                  {"rl_batch_size", agent.rl_batch_size},
                  {"sync_period", agent.sync_period},
                  {"epsilon_init", agent.epsilon_init},
                  {"epsilon_end", agent.epsilon_end},
                  {"decay_rounds", agent.decay_rounds},
                  {"k_pca", agent.k_pca},
                  {"hidden_dim", agent.hidden_dim},
                  {"buffer_capacity", agent.buffer_capacity},
                  {"target_state", agent.target_state}};
    return j;
}

}  // namespace flsim
