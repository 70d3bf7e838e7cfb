/*
 * Run configuration: a single JSON document covering population, local
 * training, dataset, partition, hardware, scoring and agent settings.
 * Parsing records which fields fell back to defaults; validation reports
 * every violation at once.
 */
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flsim/hardware.hpp"
#include "flsim/scoring.hpp"

namespace flsim {

enum class PolicyKind { Random, FullParticipation, FlashRL };

std::string policy_name(PolicyKind p);
std::optional<PolicyKind> policy_from_name(const std::string& name);

enum class ScoreMode { Utility, Accuracy };
enum class PerformanceMetric { Accuracy, MacroF1 };

struct DatasetConfig {
    std::string kind = "blobs";  // "blobs" | "idx"
    // blobs
    int num_classes = 10;
    int input_dim = 16;
    int n_per_class = 200;
    double spread = 1.0;
    long long bits_per_sample = 0;  // 0 = derive (blobs: input_dim*32; idx: rows*cols*8)
    // idx
    std::string images_path;
    std::string labels_path;
};

struct PartitionConfig {
    std::string scheme = "hetero_dirichlet";  // hetero_dirichlet|shards|noniid_label|label_skew
    double alpha = 0.5;
    int min_size = 10;
    int shards_per_client = 2;
    int labels_per_client = 2;
    double size_jitter = 0.3;
};

struct ClientHardwareOverride {
    std::optional<int> spec_index;        // 1-based row in the catalog
    std::optional<std::string> protocol;  // catalog protocol name
    std::optional<double> cycles_per_bit;
};

struct HardwareConfig {
    std::optional<nlohmann::json> catalog;  // overrides the builtin catalog
    std::vector<int> spec_pool;             // 1-based indices; empty = all
    std::vector<std::string> protocol_pool; // names; empty = all
    double cycles_per_bit = 1.0;
    double freq_stdev_frac = 0.1;
    double bw_stdev_frac = 0.1;
    int bits_per_param = 32;
    std::map<int, ClientHardwareOverride> overrides;  // client id -> override
};

struct AgentConfig {
    double gamma = 0.9;
    double rl_learning_rate = 0.01;
    int rl_batch_size = 50;
    int sync_period = 10;  // P
    double epsilon_init = 0.9;
    double epsilon_end = 0.2;
    int decay_rounds = 0;  // 0 = total_rounds
    int k_pca = 10;
    int hidden_dim = 128;
    int buffer_capacity = 1000;
    std::string target_state = "next";  // "next" | "current"
};

struct ScoreSettings {
    ScoreConfig base;
    ScoreMode mode = ScoreMode::Utility;
    PerformanceMetric metric = PerformanceMetric::Accuracy;
    double divergence_eps = 1e-8;
};

struct FLRunConfig {
    int num_clients = 0;       // N (required)
    int clients_per_round = 0; // U (required)
    int total_rounds = -1;     // required
    PolicyKind policy = PolicyKind::FlashRL;
    std::uint64_t seed = 1;

    int local_epochs = 5;       // E
    int local_batch_size = 50;  // B
    double learning_rate = 0.01;
    double momentum = 0.9;
    int model_hidden_dim = 0;

    DatasetConfig dataset;
    PartitionConfig partition;
    double validation_fraction = 0.1;
    HardwareConfig hardware;
    ScoreSettings score;
    AgentConfig agent;

    int checkpoint_every = 0;  // 0 = final checkpoint only
    std::string out_dir;

    // fields that were not present in the source document
    std::vector<std::string> defaulted;

    nlohmann::json to_json() const;  // config echo (defaulted list excluded)
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(std::vector<std::string> problems);
    std::vector<std::string> problems;
};

// Parses and validates; throws ConfigError listing every violation.
FLRunConfig parse_config(const nlohmann::json& doc);
FLRunConfig load_config_file(const std::string& path);

// All validation messages for an already-populated config (empty = valid).
std::vector<std::string> validate_config(const FLRunConfig& cfg);

}  // namespace flsim
