/*
 * System heterogeneity model: edge hardware catalog, transfer protocols,
 * per-round stochastic frequency/bandwidth, and the latency equations.
 *
 * Unit convention, project-wide: bits, seconds, MHz = 1e6 cycles/s,
 * Mb/s = 1e6 bits/s.
 */
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "flsim/numerics.hpp"
#include "flsim/rng.hpp"

namespace flsim {

struct HardwareSpec {
    std::string name;
    double cpu_freq_mhz = 0.0;  // mean CPU frequency
    int cores = 0;
};

struct TransferProtocol {
    std::string name;
    double bandwidth_mbps = 0.0;  // mean bandwidth
};

struct HardwareCatalog {
    std::vector<HardwareSpec> specs;
    std::vector<TransferProtocol> protocols;
};

struct ClientSystemProfile {
    HardwareSpec hardware;
    TransferProtocol protocol;
    double cycles_per_bit = 1.0;
    double freq_stdev_frac = 0.1;  // stdev as a fraction of the mean
    double bw_stdev_frac = 0.1;
};

struct RoundConditions {
    double freq_mhz = 0.0;
    double bandwidth_mbps = 0.0;
};

// The 12 simulated edge devices and 4 transfer protocols.
HardwareCatalog builtin_hardware_catalog();

// Normal(mean, mean*stdev_frac) draws, floored at 0.1*mean.
RoundConditions sample_round_conditions(const ClientSystemProfile& profile, Rng& rng);

// data_bits * cycles_per_bit / (cores * freq)   [freq in cycles/s]
double local_compute_time(double data_bits, double cycles_per_bit, int cores, double freq_mhz);

// model_bits / bandwidth                        [bandwidth in bits/s]
double transmission_time(double model_bits, double bandwidth_mbps);

// compute time + transmission time for one selected client
double client_latency(const ClientSystemProfile& profile, const RoundConditions& cond,
                      double data_bits, double model_bits);

long long model_size_bits(const ModelSpec& spec, int bits_per_param = 32);

// Catalog override format:
//   {"specs": [{"name","cpu_freq_mhz","cores"}...],
//    "protocols": [{"name","bandwidth_mbps"}...]}
nlohmann::json catalog_to_json(const HardwareCatalog& catalog);
HardwareCatalog catalog_from_json(const nlohmann::json& j);

}  // namespace flsim
