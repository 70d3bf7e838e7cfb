/*
 * Synchronous FL loop: state -> selection -> local training -> aggregation ->
 * evaluation -> scoring -> reward -> replay -> DDQL update -> target sync.
 * Hosts the baseline policies and the run metrics/manifest/checkpoint output.
 */
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flsim/config.hpp"
#include "flsim/data.hpp"
#include "flsim/hardware.hpp"
#include "flsim/numerics.hpp"
#include "flsim/rl_agent.hpp"
#include "flsim/scoring.hpp"

namespace flsim {

struct RoundRecord {
    int round = 0;  // 1-based in records and CSV
    std::vector<int> selected;
    double global_accuracy = 0.0;
    double global_macro_f1 = 0.0;
    double round_latency_s = 0.0;
    double cumulative_latency_s = 0.0;
    double mean_reward = 0.0;
    std::optional<double> agent_loss;  // absent for baseline policies
    std::optional<double> epsilon;
};

// w = sum_k (n_k / sum n) * w_k
ParamVector aggregate_fedavg(const std::vector<ParamVector>& client_params,
                             const std::vector<long long>& sizes);

// First record whose metric ("accuracy" | "macro_f1") reaches target.
std::optional<int> rounds_to_target(const std::vector<RoundRecord>& records,
                                    const std::string& metric, double target);

// Per-round scoring details, exposed to observers for audit purposes.
// Divergences and utilities align index-wise with selected (utility mode only).
struct RoundScoring {
    int round = 0;  // 1-based
    bool improved = false;
    std::vector<int> selected;
    std::vector<double> divergences;
    std::vector<double> utilities;
    std::vector<double> latencies_normalized;
};

class Simulation {
public:
    explicit Simulation(const FLRunConfig& cfg);

    // Executes round t (0-based). Rounds must run in order.
    RoundRecord run_round(int t);
    std::vector<RoundRecord> run_all();

    const FLRunConfig& config() const { return cfg_; }
    const ModelSpec& model_spec() const { return spec_; }
    const PartitionPlan& plan() const { return plan_; }
    const ParamVector& global_params() const { return global_; }
    const ReputationLedger& ledger() const { return ledger_; }
    const std::vector<ClientSystemProfile>& profiles() const { return profiles_; }
    const std::vector<RoundRecord>& records() const { return records_; }
    const LabeledDataset& validation_set() const { return validation_; }
    int client_data_count(int k) const;
    const ReplayBuffer* replay_buffer() const { return buffer_.get(); }
    // per-client label counts of the partitioned training data
    std::vector<std::vector<int>> partition_histogram() const;

    // Agent state the policy would see at the start of round t.
    AgentState state_for_round(int t);

    nlohmann::json agent_checkpoint() const;  // null for baseline policies
    nlohmann::json checkpoint(int completed_rounds) const;

    void set_scoring_observer(std::function<void(const RoundScoring&)> observer) {
        scoring_observer_ = std::move(observer);
    }

private:
    std::vector<RoundConditions> conditions_for_round(int t);
    AgentState encode_for_round(int t);
    std::vector<int> select_clients(int t, const AgentState& state, double eps);
    Rng stream(std::string_view tag, std::uint64_t client = 0, std::uint64_t round = 0) const;

    FLRunConfig cfg_;
    ModelSpec spec_;
    LabeledDataset validation_;
    std::vector<LabeledDataset> client_data_;
    PartitionPlan plan_;
    std::vector<ClientSystemProfile> profiles_;
    StateNormStats norm_stats_;
    EpsilonSchedule schedule_;
    TargetState target_state_mode_ = TargetState::Next;
    double model_bits_ = 0.0;

    ParamVector global_;
    ReputationLedger ledger_;
    double prev_performance_ = 0.0;
    double cumulative_latency_ = 0.0;
    std::vector<RoundRecord> records_;
    int next_round_ = 0;

    // agent (FlashRL only)
    std::vector<ParamVector> last_known_;
    PcaProjector projector_;
    QNetwork main_net_, target_net_;
    std::unique_ptr<ReplayBuffer> buffer_;
    long long update_steps_ = 0;

    // conditions cache for the current and next round
    std::vector<std::pair<int, std::vector<RoundConditions>>> conditions_cache_;

    std::function<void(const RoundScoring&)> scoring_observer_;
};

// Runs all rounds; when cfg.out_dir is set, writes metrics.csv, manifest.json
// and checkpoints (atomically, write-then-rename).
std::vector<RoundRecord> run_simulation(const FLRunConfig& cfg);

// CSV codec for the metrics stream (documented column order).
std::string metrics_csv_header();
std::string metrics_to_csv(const std::vector<RoundRecord>& records);
std::vector<RoundRecord> metrics_from_csv_file(const std::string& path);

void write_text_atomic(const std::string& path, const std::string& content);

extern const char* const kVersionString;

}  // namespace flsim
