/*
 * Dataset ingestion and non-IID partitioners. All partitioners return index
 * plans over the source dataset; plans are JSON-serializable for audit and
 * replay.
 */
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "flsim/numerics.hpp"
#include "flsim/rng.hpp"

namespace flsim {

struct PartitionPlan {
    std::string scheme;
    nlohmann::json params;  // scheme parameters, for the audit record
    std::uint64_t seed = 0;
    std::vector<std::vector<int>> assignments;

    nlohmann::json to_json() const;
    static PartitionPlan from_json(const nlohmann::json& j);

    // per-client count of each label value in [0, num_labels)
    std::vector<std::vector<int>> label_histogram(const LabeledDataset& ds) const;
};

// Class-conditional Gaussian clusters with means spaced on a circle in the
// first two feature dimensions. spread is the per-coordinate noise stdev.
LabeledDataset synth_blobs(int num_classes, int input_dim, int n_per_class, double spread,
                           Rng& rng);

// IDX image/label pair (the MNIST container format). Pixels scaled to [0,1],
// bits_per_sample = rows*cols*8. Parse errors name the failing byte offset.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

// Per-label proportions drawn from Dirichlet(alpha); the whole plan is
// redrawn (up to 100 times) until every client holds >= min_size samples.
PartitionPlan partition_hetero_dirichlet(const LabeledDataset& ds, int num_clients, double alpha,
                                         int min_size, Rng& rng);

// Label-sorted dataset cut into num_clients*shards_per_client contiguous
// shards; client i takes shards [i*spc, (i+1)*spc). Equal sizes by
// construction; the tail that does not fill a shard is dropped.
PartitionPlan partition_shards(const LabeledDataset& ds, int num_clients,
                               int shards_per_client = 2);

// Each client holds exactly labels_per_client distinct labels (assigned
// round-robin); per-label shares are jittered by size_jitter so client sizes
// vary.
PartitionPlan partition_noniid_label(const LabeledDataset& ds, int num_clients,
                                     int labels_per_client, double size_jitter, Rng& rng);

// Round-robin k-subset of labels per client, equal per-label shares.
PartitionPlan label_skew_partition(const LabeledDataset& ds, int num_clients,
                                   int activities_per_client);

}  // namespace flsim
