#pragma once

#include "despeckle/settings.hpp"

#include <torch/torch.h>

#include <optional>
#include <vector>

namespace despeckle {

inline constexpr double kAdainEps = 1e-5;

/// Standardizes each sample over `dims` (mean 0, unit population std). With
/// `eps_on_sigma` the divisor is sigma + eps, otherwise sqrt(var + eps).
/// Groups whose variance is at floating-point roundoff level of their mean are
/// treated as exactly constant: they map to 0 and pass no gradient. Without
/// this, stacks of normalizations on flat inputs (clean phantom background)
/// amplify the input gradient by ~1/sqrt(eps) per layer until it overflows.
torch::Tensor standardize(const torch::Tensor& x, std::vector<int64_t> dims, double eps,
                          bool eps_on_sigma);

/// Instance normalization without affine parameters.
class InstanceNormImpl : public torch::nn::Module {
public:
    explicit InstanceNormImpl(double eps = 1e-5) : eps_(eps) {}
    torch::Tensor forward(const torch::Tensor& x);

private:
    double eps_;
};
TORCH_MODULE(InstanceNorm);

/// Normalization over all of (C,H,W) per sample with a per-channel affine,
/// i.e. group normalization with a single group.
class LayerNorm2dImpl : public torch::nn::Module {
public:
    explicit LayerNorm2dImpl(int64_t channels, double eps = 1e-5);
    torch::Tensor forward(const torch::Tensor& x);

private:
    double eps_;
    torch::Tensor weight_, bias_;
};
TORCH_MODULE(LayerNorm2d);

/// Per-channel affine modulation applied after instance normalization.
struct AdaINParams {
    torch::Tensor gamma;  // (B, C)
    torch::Tensor beta;   // (B, C)
};

/// out = gamma * (f - mu(f)) / (sigma(f) + eps) + beta, with mu and the
/// population sigma taken over the spatial dims of each sample and channel.
/// A constant channel maps to beta.
torch::Tensor adain(const torch::Tensor& features, const AdaINParams& params,
                    double eps = kAdainEps);

/// Splits a (B, 2C) MLP output into gamma = first C, beta = last C.
AdaINParams split_affine(const torch::Tensor& mlp_output);

/// Content feature map plus the encoder activations reused by the clean
/// generator's skip connections (highest resolution first).
struct ContentFeatures {
    torch::Tensor content;
    std::vector<torch::Tensor> skips;
};

/// Noise code of an image batch. For the Gaussian head `mean`/`logvar` hold
/// the posterior and `code` is a reparameterized sample (or the mean when no
/// generator is supplied); otherwise `code` is the deterministic projection.
struct NoiseCode {
    torch::Tensor code;    // (B, d_n)
    torch::Tensor mean;    // Gaussian head only
    torch::Tensor logvar;  // Gaussian head only
};

/// Conv -> InstanceNorm -> ReLU -> Conv -> InstanceNorm, plus identity.
class ResidualBlockImpl : public torch::nn::Module {
public:
    explicit ResidualBlockImpl(int64_t channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
    InstanceNorm norm1_{nullptr}, norm2_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Residual block whose two normalizations are AdaIN layers.
class AdaINResidualBlockImpl : public torch::nn::Module {
public:
    explicit AdaINResidualBlockImpl(int64_t channels);
    torch::Tensor forward(const torch::Tensor& x, const AdaINParams& first,
                          const AdaINParams& second);

private:
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
};
TORCH_MODULE(AdaINResidualBlock);

/// Input conv, stride-2 down sampler, residual blocks.
class ContentEncoderImpl : public torch::nn::Module {
public:
    explicit ContentEncoderImpl(const NetworkConfig& config);
    /// Spatial dims must be multiples of downsample_factor (ShapeError otherwise).
    ContentFeatures forward(const torch::Tensor& images);

private:
    NetworkConfig config_;
    torch::nn::Sequential input_{nullptr};
    std::vector<torch::nn::Sequential> down_;
    torch::nn::Sequential residual_{nullptr};
};
TORCH_MODULE(ContentEncoder);

/// Input conv, down sampler, adaptive average pooling to 1x1 and a 1x1 conv.
class NoiseEncoderImpl : public torch::nn::Module {
public:
    static constexpr int64_t kMinSpatial = 8;

    NoiseEncoderImpl(const NetworkConfig& config, bool gaussian_head);
    /// `generator` drives the reparameterization noise of the Gaussian head;
    /// without it the head returns its mean.
    NoiseCode forward(const torch::Tensor& images, std::optional<at::Generator> generator = {});
    bool gaussian_head() const { return gaussian_head_; }

private:
    NetworkConfig config_;
    bool gaussian_head_;
    torch::nn::Sequential body_{nullptr};
    torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(NoiseEncoder);

/// Decodes content features back to an image, fusing the encoder skips.
class CleanGeneratorImpl : public torch::nn::Module {
public:
    explicit CleanGeneratorImpl(const NetworkConfig& config);
    torch::Tensor forward(const ContentFeatures& features);

private:
    NetworkConfig config_;
    torch::nn::Sequential residual_{nullptr};
    std::vector<torch::nn::Sequential> up_;
    torch::nn::Conv2d output_{nullptr};
};
TORCH_MODULE(CleanGenerator);

/// Decodes content features with a noise code injected through AdaIN in every
/// residual block; the MLP maps the code to all blocks' (gamma, beta).
class NoisyGeneratorImpl : public torch::nn::Module {
public:
    explicit NoisyGeneratorImpl(const NetworkConfig& config);
    torch::Tensor forward(const torch::Tensor& content, const torch::Tensor& noise_code);

    /// The per-block affine parameters the MLP produces for a noise code.
    std::vector<AdaINParams> affine_params(const torch::Tensor& noise_code);

private:
    NetworkConfig config_;
    torch::nn::Sequential mlp_{nullptr};
    std::vector<AdaINResidualBlock> blocks_;
    std::vector<torch::nn::Sequential> up_;
    torch::nn::Conv2d output_{nullptr};
};
TORCH_MODULE(NoisyGenerator);

/// PatchGAN discriminator: one real/fake logit per receptive-field patch.
class PatchDiscriminatorImpl : public torch::nn::Module {
public:
    explicit PatchDiscriminatorImpl(const NetworkConfig& config);
    torch::Tensor forward(const torch::Tensor& images);

    /// Logit map size for an input of `size` pixels along one axis.
    static int64_t output_size(int64_t size, int64_t layers);

private:
    torch::nn::Sequential net_{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

/// The seven networks of the disentangling model. The noise discriminator
/// exists only for the patch-adversarial noise loss.
struct ModelSet {
    ContentEncoder content_encoder{nullptr};
    NoiseEncoder noise_encoder{nullptr};
    CleanGenerator clean_generator{nullptr};
    NoisyGenerator noisy_generator{nullptr};
    PatchDiscriminator clean_discriminator{nullptr};
    PatchDiscriminator noisy_discriminator{nullptr};
    PatchDiscriminator noise_discriminator{nullptr};

    /// Builds the networks the training config calls for, after seeding the
    /// torch RNG with `init_seed`.
    static ModelSet create(const TrainConfig& config, uint64_t init_seed);

    bool has_noise_discriminator() const { return !noise_discriminator.is_empty(); }

    std::vector<torch::Tensor> generator_parameters() const;
    std::vector<torch::Tensor> discriminator_parameters() const;

    /// (name, module) for every constructed network, in a fixed order.
    std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> named_modules() const;

    void train(bool on = true);
};

/// Throws ShapeError unless `images` is (B, 1, H, W).
void require_single_channel(const torch::Tensor& images, const char* where);

}  // namespace despeckle
