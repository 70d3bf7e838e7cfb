#include "flsim/hardware.hpp"

#include <algorithm>
#include <stdexcept>

namespace flsim {

namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0)) {
        throw std::invalid_argument(std::string(what) + " must be positive, got " +
                                    std::to_string(v));
    }
}

}  // namespace

HardwareCatalog builtin_hardware_catalog() {
    HardwareCatalog c;
    c.specs = {
        {"Hardware Spec. 1", 921.0, 128},  {"Hardware Spec. 2", 1300.0, 256},
        {"Hardware Spec. 3", 800.0, 384},  {"Hardware Spec. 4", 1100.0, 384},
        {"Hardware Spec. 5", 1377.0, 384}, {"Hardware Spec. 6", 350.0, 4},
        {"Hardware Spec. 7", 1500.0, 4},   {"Hardware Spec. 8", 700.0, 1},
        {"Hardware Spec. 9", 3950.0, 2},   {"Hardware Spec. 10", 4300.0, 4},
        {"Hardware Spec. 11", 4400.0, 4},  {"Hardware Spec. 12", 4400.0, 8},
    };
    c.protocols = {
        {"Wi-Fi 1", 6.0},
        {"Wi-Fi 3", 33.0},
        {"Wi-Fi 4", 336.0},
        {"Fast Ethernet", 100.0},
    };
    return c;
}

RoundConditions sample_round_conditions(const ClientSystemProfile& profile, Rng& rng) {
    require_positive(profile.hardware.cpu_freq_mhz, "cpu_freq_mhz");
    require_positive(profile.protocol.bandwidth_mbps, "bandwidth_mbps");

    auto truncated = [&rng](double mean, double frac) {
        double v = frac > 0.0 ? rng.normal(mean, mean * frac) : mean;
        return std::max(v, 0.1 * mean);
    };
    return {truncated(profile.hardware.cpu_freq_mhz, profile.freq_stdev_frac),
            truncated(profile.protocol.bandwidth_mbps, profile.bw_stdev_frac)};
}

double local_compute_time(double data_bits, double cycles_per_bit, int cores, double freq_mhz) {
    require_positive(data_bits, "data_bits");
    require_positive(cycles_per_bit, "cycles_per_bit");
    require_positive(static_cast<double>(cores), "cores");
    require_positive(freq_mhz, "freq_mhz");
    return data_bits * cycles_per_bit / (cores * freq_mhz * 1e6);
}

double transmission_time(double model_bits, double bandwidth_mbps) {
    require_positive(model_bits, "model_bits");
    require_positive(bandwidth_mbps, "bandwidth_mbps");
    return model_bits / (bandwidth_mbps * 1e6);
}

double client_latency(const ClientSystemProfile& profile, const RoundConditions& cond,
                      double data_bits, double model_bits) {
    return local_compute_time(data_bits, profile.cycles_per_bit, profile.hardware.cores,
                              cond.freq_mhz) +
           transmission_time(model_bits, cond.bandwidth_mbps);
}

long long model_size_bits(const ModelSpec& spec, int bits_per_param) {
    return static_cast<long long>(spec.param_count()) * bits_per_param;
}

nlohmann::json catalog_to_json(const HardwareCatalog& catalog) {
    nlohmann::json j;
    j["specs"] = nlohmann::json::array();
    for (const auto& s : catalog.specs) {
        j["specs"].push_back({{"name", s.name}, {"cpu_freq_mhz", s.cpu_freq_mhz}, {"cores", s.cores}});
    }
    j["protocols"] = nlohmann::json::array();
    for (const auto& p : catalog.protocols) {
        j["protocols"].push_back({{"name", p.name}, {"bandwidth_mbps", p.bandwidth_mbps}});
    }
    return j;
}

HardwareCatalog catalog_from_json(const nlohmann::json& j) {
    HardwareCatalog c;
    for (const auto& s : j.at("specs")) {
        HardwareSpec spec{s.at("name").get<std::string>(), s.at("cpu_freq_mhz").get<double>(),
                          s.at("cores").get<int>()};
        require_positive(spec.cpu_freq_mhz, "cpu_freq_mhz");
        if (spec.cores < 1) throw std::invalid_argument("catalog: cores must be >= 1");
        c.specs.push_back(std::move(spec));
    }
    for (const auto& p : j.at("protocols")) {
        TransferProtocol proto{p.at("name").get<std::string>(), p.at("bandwidth_mbps").get<double>()};
        require_positive(proto.bandwidth_mbps, "bandwidth_mbps");
        c.protocols.push_back(std::move(proto));
    }
    if (c.specs.empty() || c.protocols.empty()) {
        throw std::invalid_argument("catalog: needs at least one spec and one protocol");
    }
    return c;
}

}  // namespace flsim
