#pragma once

#include "despeckle/image.hpp"
#include "despeckle/networks.hpp"
#include "despeckle/settings.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <optional>

namespace despeckle {

/// Whole-image inference with the content encoder and clean generator of a
/// trained checkpoint. The noise encoder is not needed and not loaded.
class Denoiser {
public:
    /// `expected` guards against pairing a checkpoint with the wrong network
    /// plan; a mismatch raises ConfigError.
    static Denoiser from_checkpoint(const std::filesystem::path& path,
                                    const std::optional<NetworkConfig>& expected = {});

    /// Wraps networks that are already in memory (e.g. a live trainer).
    Denoiser(NetworkConfig config, ContentEncoder encoder, CleanGenerator generator);

    /// Same dims as the input, values in [0,1]. Sizes that are not multiples
    /// of the downsample factor (or below twice the factor) are padded at the
    /// bottom/right, reflect where possible, and cropped back.
    Image denoise(const Image& image) const;

    /// (B,1,H,W) batch whose dims are already multiples of the factor.
    torch::Tensor denoise_batch(const torch::Tensor& images) const;

    const NetworkConfig& network() const { return config_; }

private:
    NetworkConfig config_;
    mutable ContentEncoder encoder_;
    mutable CleanGenerator generator_;
};

/// image - denoised, in [-1,1]. Unequal dims raise DimensionError.
Image extract_noise_estimate(const Image& image, const Image& denoised);

/// Rows/cols of padding needed to reach the next multiple of `factor`.
int64_t padding_to_multiple(int64_t size, int64_t factor);

}  // namespace despeckle
