#pragma once

#include "despeckle/dataset_prep.hpp"
#include "despeckle/losses.hpp"
#include "despeckle/networks.hpp"
#include "despeckle/settings.hpp"

#include <ATen/core/Generator.h>
#include <torch/torch.h>

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>

namespace despeckle {

/// One unpaired training triple batch: noisy patches x, clean patches y and
/// background noise patches n (n may be undefined without a noise loss).
struct TripleBatch {
    torch::Tensor noisy;
    torch::Tensor clean;
    torch::Tensor noise;
};

/// Runs both translation passes.
///   first pass:  x_clean = G_C(E_C(x)), y_noisy = G_N(E_C(y), E_N(x)),
///                x_recon = G_N(E_C(x), E_N(x)), y_recon = G_C(E_C(y))
///   second pass: x_cycle = G_N(E_C(x_clean), E_N(y_noisy)),
///                y_cycle = G_C(E_C(y_noisy))
/// `generator` feeds the Gaussian head's sampling; without it the head's mean
/// is used. Shape mismatches raise ShapeError naming the stage.
TranslationBundle build_translation_bundle(const torch::Tensor& x, const torch::Tensor& y,
                                           const torch::Tensor& n, ModelSet& model,
                                           std::optional<at::Generator> generator = {});

inline constexpr const char* kCheckpointFormat = "despeckle-checkpoint";
inline constexpr int64_t kCheckpointVersion = 1;

/// Networks, optimizers and random state of one training run.
///
/// Each step updates the discriminators on detached fakes first, then the
/// encoders and generators jointly on total_g. Two Adam optimizers own
/// disjoint parameter sets, so each set is touched exactly once per step.
class Trainer {
public:
    explicit Trainer(TrainConfig config);

    LossReport step(const TripleBatch& batch);

    ModelSet& model() { return model_; }
    const ModelSet& model() const { return model_; }
    const TrainConfig& config() const { return config_; }

    int64_t epoch() const { return epoch_; }
    int64_t global_step() const { return global_step_; }
    void finish_epoch() { ++epoch_; }

    std::mt19937_64& shuffle_rng() { return shuffle_rng_; }

    /// Free-form provenance text stored with every checkpoint.
    void set_provenance(std::string text) { provenance_ = std::move(text); }
    const std::string& provenance() const { return provenance_; }

    /// Versioned archive of config, all network parameters, both optimizer
    /// states, epoch/step counters and every RNG state.
    void save_checkpoint(const std::filesystem::path& path) const;
    static std::unique_ptr<Trainer> from_checkpoint(const std::filesystem::path& path);

private:
    TrainConfig config_;
    ModelSet model_;
    std::unique_ptr<torch::optim::Adam> generator_opt_;
    std::unique_ptr<torch::optim::Adam> discriminator_opt_;
    mutable at::Generator sampling_rng_;
    std::mt19937_64 shuffle_rng_;
    int64_t epoch_ = 0;
    int64_t global_step_ = 0;
    std::string provenance_;
};

/// Reads the training config stored in a checkpoint.
TrainConfig read_checkpoint_config(const std::filesystem::path& path);

/// epochs * floor(min(|noisy|, |clean|) / batch_size).
int64_t planned_steps(const TrainConfig& config, int64_t noisy_count, int64_t clean_count);

struct TrainResult {
    int64_t steps = 0;
    std::filesystem::path final_checkpoint;
    LossReport last_report;
};

using StepCallback = std::function<void(const Trainer&, const LossReport&)>;

/// Trains from the trainer's current epoch up to config.epochs. Each epoch
/// shuffles the three populations independently with the trainer's seeded
/// RNG; noise patches are drawn cyclically from their own permutation. With a
/// non-empty `out_dir` writes train_log.tsv (appending on resume), periodic
/// checkpoints with sample grids, and checkpoint_final.pt.
TrainResult train(Trainer& trainer, const PatchSet& patches,
                  const std::filesystem::path& out_dir = {}, const StepCallback& on_step = {});

/// (N,1,P,P) float tensor view of a patch population (copied).
torch::Tensor population_tensor(const PatchPopulation& pop, int64_t patch_size);

}  // namespace despeckle
