#pragma once

#include "despeckle/dataset_prep.hpp"
#include "despeckle/phantom.hpp"
#include "despeckle/settings.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace despeckle {

struct DataPaths {
    std::filesystem::path noisy_dir;
    std::filesystem::path clean_dir;
    std::filesystem::path boundary_manifest;
    std::filesystem::path patchset_dir;
    std::filesystem::path test_dir;  // noisy test images
    std::filesystem::path roi_config;
    std::filesystem::path results_dir;
    std::filesystem::path checkpoint;

    bool operator==(const DataPaths&) const = default;
};

struct BaselineConfig {
    int median_window = 3;
    double bilateral_sigma_spatial = 2.0;
    double bilateral_sigma_range = 0.1;

    bool operator==(const BaselineConfig&) const = default;
};

/// Everything one command needs. `seed` is the single root seed; the train
/// and phantom seeds are derived from it when resolved.
struct ExperimentConfig {
    uint64_t seed = 0;
    std::filesystem::path output_dir = "runs/default";
    PhantomConfig phantom;
    int64_t phantom_train_count = 6;
    int64_t phantom_test_count = 2;
    PrepareConfig prepare;
    TrainConfig train;
    DataPaths data;
    BaselineConfig baselines;

    /// Flat `[section]` / `key = value` text that parses back to this config.
    std::string to_ini() const;
    /// One-line JSON of every key, used in provenance records and headers.
    std::string to_json() const;
};

/// Strict parse: unknown keys and malformed values raise ConfigError naming
/// the key. `overrides` are `section.key=value` strings applied after the
/// file contents.
ExperimentConfig parse_config(const std::string& ini_text,
                              const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

/// All recognized dotted keys, in serialization order.
std::vector<std::string> config_keys();

std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& json);

}  // namespace despeckle
