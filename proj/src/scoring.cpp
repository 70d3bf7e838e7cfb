#include "flsim/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flsim {

void ScoreConfig::validate() const {
    if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("ScoreConfig: lambda must lie in [0,1]");
    if (alpha1 < 0.0 || alpha2 < 0.0) throw std::invalid_argument("ScoreConfig: alphas must be >= 0");
    if (alpha1 + alpha2 <= 0.0) throw std::invalid_argument("ScoreConfig: alpha1 + alpha2 must be > 0");
}

double divergence(const ParamVector& w_client, const ParamVector& w_global, double eps) {
    if (w_client.size() != w_global.size()) {
        throw std::invalid_argument("divergence: length mismatch (" +
                                    std::to_string(w_client.size()) + " vs " +
                                    std::to_string(w_global.size()) + ")");
    }
    if (w_global.empty()) throw std::invalid_argument("divergence: empty weight vectors");
    if (eps <= 0.0) throw std::invalid_argument("divergence: eps must be > 0");

    double sum = 0.0;
    for (std::size_t j = 0; j < w_global.size(); ++j) {
        double denom = std::max(std::abs(w_global[j]), eps);
        sum += std::abs(w_client[j] - w_global[j]) / denom;
    }
    return sum / static_cast<double>(w_global.size());
}

double utility(double d, bool improved) {
    if (d < 0.0) throw std::invalid_argument("utility: divergence must be >= 0");
    double e = std::exp(-d);
    return improved ? e : 1.0 - e;
}

std::vector<double> minmax_normalize(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("minmax_normalize: empty list");
    auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    double mn = *mn_it, mx = *mx_it;
    std::vector<double> out(values.size());
    if (mx == mn) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    double inv = 1.0 / (mx - mn);
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mn) * inv;
    return out;
}

ReputationLedger::ReputationLedger(int num_clients, double psi_init) {
    for (int k = 0; k < num_clients; ++k) psi_[k] = psi_init;
}

double ReputationLedger::psi(int client) const {
    auto it = psi_.find(client);
    if (it == psi_.end()) {
        throw std::invalid_argument("ReputationLedger: unknown client " + std::to_string(client));
    }
    return it->second;
}

double ReputationLedger::apply(int client, double instant_score, double lambda) {
    auto it = psi_.find(client);
    if (it == psi_.end()) {
        throw std::invalid_argument("ReputationLedger: unknown client " + std::to_string(client));
    }
    it->second = lambda * instant_score + (1.0 - lambda) * it->second;
    ++updates_;
    return it->second;
}

nlohmann::json ReputationLedger::snapshot() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : psi_) j[std::to_string(k)] = v;
    return j;
}

double reputation_update(ReputationLedger& ledger, int client, double zeta, double lat_norm,
                         const ScoreConfig& cfg) {
    cfg.validate();
    if (zeta < 0.0 || zeta > 1.0) throw std::invalid_argument("reputation_update: zeta must lie in [0,1]");
    if (lat_norm < 0.0 || lat_norm > 1.0) {
        throw std::invalid_argument("reputation_update: lat_norm must lie in [0,1]");
    }
    return ledger.apply(client, cfg.alpha1 * zeta - cfg.alpha2 * lat_norm, cfg.lambda);
}

double reputation_update_accuracy(ReputationLedger& ledger, int client, double acc_local,
                                  double acc_global_prev, double lambda) {
    if (acc_local < 0.0 || acc_local > 1.0 || acc_global_prev < 0.0 || acc_global_prev > 1.0) {
        throw std::invalid_argument("reputation_update_accuracy: accuracies must lie in [0,1]");
    }
    if (lambda < 0.0 || lambda > 1.0) {
        throw std::invalid_argument("reputation_update_accuracy: lambda must lie in [0,1]");
    }
    return ledger.apply(client, acc_local - acc_global_prev, lambda);
}

}  // namespace flsim
