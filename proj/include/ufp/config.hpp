#pragma once

#include <optional>
#include <string>

#include "ufp/campaign.hpp"
#include "ufp/data.hpp"
#include "ufp/fault.hpp"
#include "ufp/training.hpp"

namespace ufp {

struct DatasetConfig {
    std::string kind = "blobs"; // blobs | moons | idx
    std::size_t n_train = 2000;
    std::size_t n_val = 4000;
    int classes = 4;
    double noise = 0.05;
    Shape blob_shape = {1, 16, 16};
    std::string train_images, train_labels; // idx paths
    std::string val_images, val_labels;
};

struct TopologyConfig {
    std::string name = "desk_cnn";
    std::uint64_t uncertainty_width = 16;
};

struct DetectorConfig {
    double q_low = 0.025;
    double q_high = 0.975;
    double z_threshold = 2.0;
};

struct OutputConfig {
    std::string dir = "out";
};

// Whole-pipeline configuration: strict JSON with nested sections; unknown
// keys anywhere are rejected.
struct ExperimentConfig {
    DatasetConfig dataset;
    TopologyConfig topology;
    TrainConfig train;
    std::vector<FaultSpec> faults;
    CampaignConfig campaign;
    DetectorConfig detector;
    OutputConfig output;

    void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// FaultSpec <-> config-format object (kind, site, selector, rate, k,
// target_state, seed); round-trips exactly.
std::string fault_spec_to_json(const FaultSpec& spec);
FaultSpec fault_spec_from_json(const std::string& json_text);

// Materializes the configured datasets (synthetic generation is seeded from
// the training seed: train data uses derive_seed(seed, 1), validation
// derive_seed(seed, 2)).
Dataset build_train_dataset(const ExperimentConfig& cfg);
Dataset build_val_dataset(const ExperimentConfig& cfg);

} // namespace ufp
