#pragma once

#include "despeckle/config.hpp"
#include "despeckle/dataset_prep.hpp"
#include "despeckle/denoiser.hpp"
#include "despeckle/metrics.hpp"
#include "despeckle/trainer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace despeckle {

/// Every location a command reads or writes. Paths left empty in the config
/// default to the phantom layout under the output directory, so the phantom
/// pipeline runs without any path settings.
struct RunPaths {
    std::filesystem::path root;
    std::filesystem::path noisy_dir;
    std::filesystem::path clean_dir;
    std::filesystem::path boundary_manifest;
    std::filesystem::path test_dir;
    std::filesystem::path test_clean_dir;  // phantom ground truth, diagnostics only
    std::filesystem::path roi_config;
    std::filesystem::path patchset_dir;
    std::filesystem::path train_dir;
    std::filesystem::path checkpoint;
    std::filesystem::path results_dir;
};

/// `output_root` (the DESPECKLE_OUTPUT_ROOT value, may be empty) prefixes a
/// relative output_dir.
RunPaths resolve_paths(const ExperimentConfig& config, const std::filesystem::path& output_root = {});

/// Resolved config, seed, command and library versions as one JSON object.
std::string provenance_json(const ExperimentConfig& config, const std::string& command);
void write_run_record(const ExperimentConfig& config, const std::string& command,
                      const std::filesystem::path& dir);

struct PhantomCorpus {
    std::vector<std::string> train_noisy;  // file names
    std::vector<std::string> train_clean;
    std::vector<std::string> test_ids;     // file stems
};

/// Generates train_count phantoms (first half saved noisy, second half clean,
/// so no phantom appears in both domains) and test_count held-out phantoms
/// with their ROI records and boundary rows.
PhantomCorpus write_phantom_corpus(const ExperimentConfig& config, const RunPaths& paths);

/// Loads the training images, builds the patch set and saves it.
PatchSet prepare_patches(const ExperimentConfig& config, const RunPaths& paths);

/// Trains from scratch, or continues `resume` when given, into `out_dir`.
TrainResult train_model(const ExperimentConfig& config, const PatchSet& patches,
                        const std::filesystem::path& out_dir,
                        const std::filesystem::path& resume = {},
                        const StepCallback& on_step = {});

/// Denoises every image in `input` (a file or a directory) into `out_dir` as
/// `<stem>.png`; residuals go to `residual_dir` when it is set. Returns the
/// stems written.
std::vector<std::string> denoise_path(const Denoiser& denoiser, const std::filesystem::path& input,
                                      const std::filesystem::path& out_dir,
                                      const std::filesystem::path& residual_dir = {});

struct MethodResult {
    std::string method;
    MetricTable table;
};

/// Metrics of the noisy input itself, the built-in median and bilateral
/// filters, and every `results/<method>/` directory. With no method
/// directories present raises MissingInputError listing the expected files.
std::vector<MethodResult> evaluate_methods(const ExperimentConfig& config, const RunPaths& paths);

/// Per-method mean rows plus every per-image row, as TSV.
std::string format_evaluation(const std::vector<MethodResult>& results);

struct AblationRow {
    std::string variant;
    MetricTable table;
};

/// Trains the noise-loss-on, noise-loss-off and Gaussian/KL variants with the
/// same seed and patches, then evaluates each on the test set.
std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const RunPaths& paths,
                                      const PatchSet& patches);

/// Variant, CNR, EPI, MSR, ENL.
std::string format_ablation(const std::vector<AblationRow>& rows);

/// Test ids (file stems) found in the test directory.
std::vector<std::string> test_image_ids(const RunPaths& paths);

}  // namespace despeckle
