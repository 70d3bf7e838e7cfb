/*
 * Client scoring: normalized model divergence, the two-case utility, min-max
 * latency normalization, and the recursive reputation kept per client.
 */
#pragma once

#include <map>
#include <vector>

#include <json.hpp>

#include "flsim/numerics.hpp"

namespace flsim {

struct ScoreConfig {
    double lambda = 0.6;    // weight of the instantaneous score vs history
    double alpha1 = 0.5;    // importance of performance
    double alpha2 = 0.5;    // importance of latency
    double psi_init = 0.01;

    void validate() const;  // throws std::invalid_argument
};

// Mean absolute relative coordinate difference between client and global
// weights; denominators |w_global_j| below eps are clamped to eps.
double divergence(const ParamVector& w_client, const ParamVector& w_global, double eps = 1e-8);

// improved -> e^{-d}; otherwise 1 - e^{-d}. The two branches sum to 1.
double utility(double d, bool improved);

// (x - min) / (max - min); a constant list maps to all 0.5.
std::vector<double> minmax_normalize(const std::vector<double>& values);

// Per-client recursive reputation. Unregistered clients are errors; scores of
// clients not updated in a round persist unchanged.
class ReputationLedger {
public:
    ReputationLedger() = default;
    ReputationLedger(int num_clients, double psi_init);

    double psi(int client) const;
    // psi' = lambda * instant + (1 - lambda) * psi
    double apply(int client, double instant_score, double lambda);
    const std::map<int, double>& all() const { return psi_; }
    int history_length() const { return updates_; }

    nlohmann::json snapshot() const;

private:
    std::map<int, double> psi_;
    int updates_ = 0;
};

// Reputation-utility-latency update: instant score = alpha1*zeta - alpha2*lat_norm.
double reputation_update(ReputationLedger& ledger, int client, double zeta, double lat_norm,
                         const ScoreConfig& cfg);

// Accuracy-difference variant: instant score = acc_local - acc_global_prev.
double reputation_update_accuracy(ReputationLedger& ledger, int client, double acc_local,
                                  double acc_global_prev, double lambda);

}  // namespace flsim
