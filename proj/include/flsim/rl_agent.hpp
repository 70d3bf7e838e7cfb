/*
 * DDQL decision core: PCA weight compression, per-client state encoding,
 * epsilon-greedy top-U multi-action selection, replay memory, and the
 * double-Q update with periodic target sync.
 */
#pragma once

#include <deque>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "flsim/numerics.hpp"
#include "flsim/rng.hpp"

namespace flsim {

using AgentState = std::vector<double>;

struct PcaProjector {
    std::vector<double> mean;        // [dim]
    std::vector<double> components;  // row-major [k_pca x dim], orthonormal rows
    std::vector<double> explained_variance;  // non-increasing
    int k_pca = 0;
    int dim = 0;

    std::span<const double> component(int i) const {
        return {components.data() + static_cast<std::size_t>(i) * dim,
                static_cast<std::size_t>(dim)};
    }
};

// Top-k principal components of the sample covariance, by power iteration
// with deflation (500 iterations or 1e-9 residual per component). Component
// signs are canonicalized so the largest-magnitude coordinate is positive.
PcaProjector fit_pca(const std::vector<ParamVector>& rows, int k_pca,
                     std::uint64_t seed = 0x7c0ffee1);

// components * (w - mean)
std::vector<double> project(const PcaProjector& p, const ParamVector& w);

// One client's raw state features before normalization.
struct ClientStateInput {
    const ParamVector* weights = nullptr;  // last-known local weights
    double data_count = 0.0;
    double cores = 0.0;
    double freq_mhz = 0.0;
    double bandwidth_mbps = 0.0;
};

// Min-max ranges used to scale the scalar state features into [0,1].
struct StateNormStats {
    double n_min = 0.0, n_max = 1.0;
    double cores_min = 0.0, cores_max = 1.0;
    double freq_min = 0.0, freq_max = 1.0;
    double bw_min = 0.0, bw_max = 1.0;
};

// Concatenated per-client blocks (reduced weights, n, cores, freq, bandwidth)
// in client-id order; length = N * (k_pca + 4).
AgentState encode_state(std::span<const ClientStateInput> clients, const PcaProjector& projector,
                        const StateNormStats& stats);

struct EpsilonSchedule {
    double eps_init = 0.9;
    double eps_end = 0.2;
    int decay_rounds = 1;
};

// Linear decay from eps_init to eps_end over decay_rounds, then constant.
double epsilon_at(const EpsilonSchedule& s, int round);

// With prob 1-eps the U highest-Q indices (ties to the lowest index), else U
// distinct uniform indices. Result ascending. Always consumes one uniform
// draw for the explore decision, so the stream layout is eps-independent.
std::vector<int> select_top_u(const std::vector<double>& qvals, int u, double eps, Rng& rng);

// One-hidden-layer tanh MLP with linear outputs; params share the numerics
// MLP layout (W1, b1, W2, b2).
struct QNetwork {
    int input_dim = 0;
    int hidden_dim = 0;
    int output_dim = 0;
    ParamVector params;

    static QNetwork init(int input_dim, int hidden_dim, int output_dim, Rng& rng);
};

std::vector<double> q_forward(const QNetwork& net, const AgentState& state);

struct Transition {
    AgentState state;
    std::vector<int> actions;  // the U selected client indices
    AgentState next_state;
    std::vector<double> rewards;  // aligned with actions
    bool done = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition tr);
    std::size_t size() const { return ring_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return ring_[i]; }

    // Without replacement when size >= batch_size, with replacement otherwise.
    std::vector<Transition> sample(std::size_t batch_size, Rng& rng) const;

private:
    std::size_t capacity_;
    std::deque<Transition> ring_;
};

// Which state the bootstrap term of the target is evaluated at.
enum class TargetState { Next, Current };

// Per selected action: r                       when done,
//                      r + gamma * Q_target(s', argmax_a Q_main(s', a))
// otherwise; s' is next_state (TargetState::Next) or state (Current).
std::vector<double> ddql_target(const Transition& tr, const QNetwork& main, const QNetwork& target,
                                double gamma, TargetState mode = TargetState::Next);

// Mean squared error between targets and main-network Q at the selected
// actions, without updating anything.
double ddql_batch_loss(const QNetwork& main, const QNetwork& target,
                       const std::vector<Transition>& batch, double gamma,
                       TargetState mode = TargetState::Next);

// One gradient step on the main network; unselected actions contribute zero
// gradient. Returns the pre-step batch loss.
double ddql_update(QNetwork& main, const QNetwork& target, const std::vector<Transition>& batch,
                   double gamma, double lr, TargetState mode = TargetState::Next);

// Copies main params into target when step_counter is a multiple of period.
bool sync_target(const QNetwork& main, QNetwork& target, long long step_counter, int period);

nlohmann::json qnetwork_to_json(const QNetwork& net);
QNetwork qnetwork_from_json(const nlohmann::json& j);
nlohmann::json projector_to_json(const PcaProjector& p);
PcaProjector projector_from_json(const nlohmann::json& j);

}  // namespace flsim
