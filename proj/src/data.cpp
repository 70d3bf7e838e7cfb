#include "flsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace flsim {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::vector<std::vector<int>> indices_by_label(const LabeledDataset& ds) {
    std::vector<std::vector<int>> by_label(static_cast<std::size_t>(ds.num_labels()));
    for (int i = 0; i < ds.size(); ++i) {
        by_label[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])].push_back(i);
    }
    return by_label;
}

void require_nonempty_clients(const std::vector<std::vector<int>>& assignments,
                              const char* scheme) {
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i].empty()) {
            throw std::runtime_error(std::string(scheme) + ": client " + std::to_string(i) +
                                     " would receive no samples");
        }
    }
}

// labels_per_client labels assigned round-robin: client i holds
// {(i*k + j) mod C : j in [0,k)}
std::vector<std::vector<int>> round_robin_label_sets(int num_clients, int k, int num_labels) {
    std::vector<std::vector<int>> sets(static_cast<std::size_t>(num_clients));
    for (int i = 0; i < num_clients; ++i) {
        for (int j = 0; j < k; ++j) {
            sets[static_cast<std::size_t>(i)].push_back((i * k + j) % num_labels);
        }
    }
    return sets;
}

std::vector<std::vector<int>> holders_by_label(const std::vector<std::vector<int>>& sets,
                                               int num_labels) {
    std::vector<std::vector<int>> holders(static_cast<std::size_t>(num_labels));
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (int c : sets[i]) holders[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
    }
    return holders;
}

class IdxReader {
public:
    explicit IdxReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw std::runtime_error("idx: cannot open " + path);
    }

    std::uint32_t read_u32() {
        unsigned char b[4];
        in_.read(reinterpret_cast<char*>(b), 4);
        if (in_.gcount() != 4) fail("truncated while reading 4-byte field");
        offset_ += 4;
        return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
               (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
    }

    void read_bytes(unsigned char* dst, std::size_t n) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            offset_ += static_cast<std::size_t>(in_.gcount());
            fail("truncated while reading payload");
        }
        offset_ += n;
    }

    [[noreturn]] void fail(const std::string& why) const {
        throw std::runtime_error("idx parse error in " + path_ + " at byte offset " +
                                 std::to_string(offset_) + ": " + why);
    }

    std::size_t offset() const { return offset_; }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

}  // namespace

nlohmann::json PartitionPlan::to_json() const {
    nlohmann::json j;
    j["scheme"] = scheme;
    j["params"] = params;
    j["seed"] = seed;
    j["assignments"] = assignments;
    return j;
}

PartitionPlan PartitionPlan::from_json(const nlohmann::json& j) {
    PartitionPlan p;
    p.scheme = j.at("scheme").get<std::string>();
    p.params = j.at("params");
    p.seed = j.at("seed").get<std::uint64_t>();
    p.assignments = j.at("assignments").get<std::vector<std::vector<int>>>();
    return p;
}

std::vector<std::vector<int>> PartitionPlan::label_histogram(const LabeledDataset& ds) const {
    int num_labels = ds.num_labels();
    std::vector<std::vector<int>> hist(assignments.size(),
                                       std::vector<int>(static_cast<std::size_t>(num_labels), 0));
    for (std::size_t c = 0; c < assignments.size(); ++c) {
        for (int i : assignments[c]) {
            ++hist[c][static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])];
        }
    }
    return hist;
}

LabeledDataset synth_blobs(int num_classes, int input_dim, int n_per_class, double spread,
                           Rng& rng) {
    if (num_classes < 2) throw std::invalid_argument("synth_blobs: num_classes must be >= 2");
    if (input_dim < 1) throw std::invalid_argument("synth_blobs: input_dim must be >= 1");
    if (n_per_class < 1) throw std::invalid_argument("synth_blobs: n_per_class must be >= 1");
    if (spread < 0.0) throw std::invalid_argument("synth_blobs: spread must be >= 0");

    constexpr double kRadius = 3.0;
    LabeledDataset ds;
    ds.input_dim = input_dim;
    ds.bits_per_sample = static_cast<long long>(input_dim) * 32;
    ds.features.reserve(static_cast<std::size_t>(num_classes) * n_per_class * input_dim);
    ds.labels.reserve(static_cast<std::size_t>(num_classes) * n_per_class);

    for (int c = 0; c < num_classes; ++c) {
        double angle = kTwoPi * c / num_classes;
        std::vector<double> mean(static_cast<std::size_t>(input_dim), 0.0);
        mean[0] = kRadius * std::cos(angle);
        if (input_dim > 1) mean[1] = kRadius * std::sin(angle);
        for (int s = 0; s < n_per_class; ++s) {
            for (int d = 0; d < input_dim; ++d) {
                ds.features.push_back(mean[static_cast<std::size_t>(d)] +
                                      (spread > 0.0 ? rng.normal(0.0, spread) : 0.0));
            }
            ds.labels.push_back(c);
        }
    }
    return ds;
}

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    constexpr std::uint32_t kImagesMagic = 0x00000803;
    constexpr std::uint32_t kLabelsMagic = 0x00000801;

    IdxReader img(images_path);
    std::uint32_t magic = img.read_u32();
    if (magic != kImagesMagic) img.fail("bad image magic (expected 0x00000803)");
    std::uint32_t n_images = img.read_u32();
    std::uint32_t rows = img.read_u32();
    std::uint32_t cols = img.read_u32();
    if (rows == 0 || cols == 0) img.fail("zero image dimensions");

    IdxReader lab(labels_path);
    magic = lab.read_u32();
    if (magic != kLabelsMagic) lab.fail("bad label magic (expected 0x00000801)");
    std::uint32_t n_labels = lab.read_u32();
    if (n_images != n_labels) {
        throw std::runtime_error("idx count mismatch: " + images_path + " has " +
                                 std::to_string(n_images) + " images but " + labels_path +
                                 " has " + std::to_string(n_labels) + " labels");
    }

    LabeledDataset ds;
    ds.input_dim = static_cast<int>(rows * cols);
    ds.bits_per_sample = static_cast<long long>(rows) * cols * 8;
    ds.features.resize(static_cast<std::size_t>(n_images) * ds.input_dim);
    ds.labels.resize(n_images);

    std::vector<unsigned char> buf(static_cast<std::size_t>(ds.input_dim));
    for (std::uint32_t i = 0; i < n_images; ++i) {
        img.read_bytes(buf.data(), buf.size());
        double* out = ds.features.data() + static_cast<std::size_t>(i) * ds.input_dim;
        for (std::size_t k = 0; k < buf.size(); ++k) out[k] = buf[k] / 255.0;
    }
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        unsigned char b;
        lab.read_bytes(&b, 1);
        ds.labels[i] = b;
    }
    return ds;
}

PartitionPlan partition_hetero_dirichlet(const LabeledDataset& ds, int num_clients, double alpha,
                                         int min_size, Rng& rng) {
    if (num_clients < 2) throw std::invalid_argument("hetero_dirichlet: need >= 2 clients");
    if (alpha <= 0.0) throw std::invalid_argument("hetero_dirichlet: alpha must be > 0");
    if (min_size < 1) throw std::invalid_argument("hetero_dirichlet: min_size must be >= 1");
    if (static_cast<long long>(num_clients) * min_size > ds.size()) {
        throw std::invalid_argument("hetero_dirichlet: infeasible min_size (" +
                                    std::to_string(num_clients) + " x " +
                                    std::to_string(min_size) + " > " + std::to_string(ds.size()) +
                                    " samples)");
    }

    auto by_label = indices_by_label(ds);
    for (auto& v : by_label) rng.shuffle(v);

    constexpr int kMaxRetries = 100;
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        std::vector<std::vector<int>> assignments(static_cast<std::size_t>(num_clients));
        for (const auto& label_idx : by_label) {
            if (label_idx.empty()) continue;
            auto props = rng.dirichlet(alpha, num_clients);
            std::size_t len = label_idx.size();
            double cum = 0.0;
            std::size_t start = 0;
            for (int c = 0; c < num_clients; ++c) {
                cum += props[static_cast<std::size_t>(c)];
                std::size_t end = c + 1 == num_clients
                                      ? len
                                      : std::min(len, static_cast<std::size_t>(cum * len));
                end = std::max(end, start);
                auto& dst = assignments[static_cast<std::size_t>(c)];
                dst.insert(dst.end(), label_idx.begin() + static_cast<std::ptrdiff_t>(start),
                           label_idx.begin() + static_cast<std::ptrdiff_t>(end));
                start = end;
            }
        }
        bool ok = true;
        for (const auto& a : assignments) {
            if (static_cast<int>(a.size()) < min_size) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        for (auto& a : assignments) std::sort(a.begin(), a.end());
        PartitionPlan plan;
        plan.scheme = "hetero_dirichlet";
        plan.params = {{"alpha", alpha}, {"min_size", min_size}, {"num_clients", num_clients}};
        plan.assignments = std::move(assignments);
        return plan;
    }
    throw std::runtime_error("hetero_dirichlet: could not satisfy min_size " +
                             std::to_string(min_size) + " within 100 attempts");
}

PartitionPlan partition_shards(const LabeledDataset& ds, int num_clients, int shards_per_client) {
    if (num_clients < 1) throw std::invalid_argument("shards: need >= 1 client");
    if (shards_per_client < 1) throw std::invalid_argument("shards: shards_per_client must be >= 1");
    long long total_shards = static_cast<long long>(num_clients) * shards_per_client;
    if (total_shards > ds.size()) {
        throw std::invalid_argument("shards: " + std::to_string(total_shards) +
                                    " shards exceed " + std::to_string(ds.size()) + " samples");
    }

    std::vector<int> order(static_cast<std::size_t>(ds.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&ds](int a, int b) {
        return ds.labels[static_cast<std::size_t>(a)] < ds.labels[static_cast<std::size_t>(b)];
    });

    std::size_t shard_size = static_cast<std::size_t>(ds.size() / total_shards);
    PartitionPlan plan;
    plan.scheme = "shards";
    plan.params = {{"shards_per_client", shards_per_client}, {"num_clients", num_clients}};
    plan.assignments.resize(static_cast<std::size_t>(num_clients));
    for (int c = 0; c < num_clients; ++c) {
        auto& dst = plan.assignments[static_cast<std::size_t>(c)];
        std::size_t begin = static_cast<std::size_t>(c) * shards_per_client * shard_size;
        std::size_t end = begin + static_cast<std::size_t>(shards_per_client) * shard_size;
        dst.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                   order.begin() + static_cast<std::ptrdiff_t>(end));
        std::sort(dst.begin(), dst.end());
    }
    return plan;
}

PartitionPlan partition_noniid_label(const LabeledDataset& ds, int num_clients,
                                     int labels_per_client, double size_jitter, Rng& rng) {
    int num_labels = ds.num_labels();
    if (num_clients < 1) throw std::invalid_argument("noniid_label: need >= 1 client");
    if (labels_per_client < 1 || labels_per_client > num_labels) {
        throw std::invalid_argument("noniid_label: labels_per_client " +
                                    std::to_string(labels_per_client) + " infeasible with " +
                                    std::to_string(num_labels) + " labels");
    }
    if (size_jitter < 0.0 || size_jitter >= 1.0) {
        throw std::invalid_argument("noniid_label: size_jitter must lie in [0, 1)");
    }

    auto sets = round_robin_label_sets(num_clients, labels_per_client, num_labels);
    auto holders = holders_by_label(sets, num_labels);
    auto by_label = indices_by_label(ds);

    for (int c = 0; c < num_labels; ++c) {
        const auto& h = holders[static_cast<std::size_t>(c)];
        if (!h.empty() && by_label[static_cast<std::size_t>(c)].size() < h.size()) {
            throw std::runtime_error("noniid_label: label " + std::to_string(c) + " has " +
                                     std::to_string(by_label[static_cast<std::size_t>(c)].size()) +
                                     " samples for " + std::to_string(h.size()) + " holders");
        }
    }

    std::vector<std::vector<int>> assignments(static_cast<std::size_t>(num_clients));
    for (int c = 0; c < num_labels; ++c) {
        auto& pool = by_label[static_cast<std::size_t>(c)];
        const auto& h = holders[static_cast<std::size_t>(c)];
        if (h.empty() || pool.empty()) continue;
        rng.shuffle(pool);

        // jittered proportional cut, then guarantee one sample per holder
        std::vector<double> w(h.size());
        double wsum = 0.0;
        for (auto& v : w) {
            v = 1.0 + size_jitter * rng.uniform(-1.0, 1.0);
            wsum += v;
        }
        std::vector<std::size_t> counts(h.size());
        std::size_t assigned = 0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            counts[i] = i + 1 == h.size()
                            ? pool.size() - assigned
                            : static_cast<std::size_t>(w[i] / wsum * static_cast<double>(pool.size()));
            assigned += counts[i];
        }
        for (std::size_t i = 0; i < h.size(); ++i) {
            while (counts[i] == 0) {
                auto big = static_cast<std::size_t>(
                    std::max_element(counts.begin(), counts.end()) - counts.begin());
                --counts[big];
                ++counts[i];
            }
        }
        std::size_t start = 0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            auto& dst = assignments[static_cast<std::size_t>(h[i])];
            dst.insert(dst.end(), pool.begin() + static_cast<std::ptrdiff_t>(start),
                       pool.begin() + static_cast<std::ptrdiff_t>(start + counts[i]));
            start += counts[i];
        }
    }
    require_nonempty_clients(assignments, "noniid_label");
    for (auto& a : assignments) std::sort(a.begin(), a.end());

    PartitionPlan plan;
    plan.scheme = "noniid_label";
    plan.params = {{"labels_per_client", labels_per_client},
                   {"size_jitter", size_jitter},
                   {"num_clients", num_clients}};
    plan.assignments = std::move(assignments);
    return plan;
}

PartitionPlan label_skew_partition(const LabeledDataset& ds, int num_clients,
                                   int activities_per_client) {
    int num_labels = ds.num_labels();
    if (activities_per_client < 1) {
        throw std::invalid_argument("label_skew: activities_per_client must be >= 1");
    }
    if (activities_per_client > num_labels) {
        throw std::invalid_argument("label_skew: activities_per_client " +
                                    std::to_string(activities_per_client) + " exceeds " +
                                    std::to_string(num_labels) + " labels");
    }
    if (num_clients < 1) throw std::invalid_argument("label_skew: need >= 1 client");

    auto sets = round_robin_label_sets(num_clients, activities_per_client, num_labels);
    auto holders = holders_by_label(sets, num_labels);
    auto by_label = indices_by_label(ds);

    std::vector<std::vector<int>> assignments(static_cast<std::size_t>(num_clients));
    for (int c = 0; c < num_labels; ++c) {
        const auto& pool = by_label[static_cast<std::size_t>(c)];
        const auto& h = holders[static_cast<std::size_t>(c)];
        if (h.empty()) continue;
        if (pool.size() < h.size()) {
            throw std::runtime_error("label_skew: label " + std::to_string(c) +
                                     " cannot supply every holder with a sample");
        }
        std::size_t base = pool.size() / h.size();
        std::size_t rem = pool.size() % h.size();
        std::size_t start = 0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            std::size_t count = base + (i < rem ? 1 : 0);
            auto& dst = assignments[static_cast<std::size_t>(h[i])];
            dst.insert(dst.end(), pool.begin() + static_cast<std::ptrdiff_t>(start),
                       pool.begin() + static_cast<std::ptrdiff_t>(start + count));
            start += count;
        }
    }
    require_nonempty_clients(assignments, "label_skew");
    for (auto& a : assignments) std::sort(a.begin(), a.end());

    PartitionPlan plan;
    plan.scheme = "label_skew";
    plan.params = {{"activities_per_client", activities_per_client}, {"num_clients", num_clients}};
    plan.assignments = std::move(assignments);
    return plan;
}

}  // namespace flsim
