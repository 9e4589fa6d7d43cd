#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace despeckle {

/// Layer plan of the encoders, generators and discriminators. Only the four
/// residual blocks and the pooled 1x1 noise head are fixed by the method;
/// every width and count here is a tunable default.
struct NetworkConfig {
    int64_t base_channels = 64;
    int64_t downsample_factor = 4;  // power of two; each factor of 2 is one stride-2 stage
    int64_t residual_blocks = 4;
    int64_t noise_dim = 16;
    int64_t mlp_hidden = 256;
    int64_t mlp_layers = 3;
    int64_t patchgan_layers = 3;

    void validate() const;
    int64_t downsample_stages() const;
    /// Channel count of the content feature map.
    int64_t content_channels() const { return base_channels << downsample_stages(); }

    bool operator==(const NetworkConfig&) const = default;
};

/// Weights of the generator objective. cycle, recon and noise default to
/// 10, 10 and 1; the domain adversarial terms keep weight 1.
struct LossWeights {
    double cycle = 10.0;
    double recon = 10.0;
    double noise = 1.0;
    double domain_adv = 1.0;

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

/// How the noise code / estimated noise is constrained.
enum class NoiseVariant {
    PatchAdversarial,  // noise discriminator against background patches
    GaussianKl,        // KL pull of the noise code toward N(0, I)
};

std::string_view variant_name(NoiseVariant v);
NoiseVariant parse_variant(std::string_view s);

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int64_t epochs = 100;
    int64_t batch_size = 4;
    uint64_t seed = 0;
    bool noise_loss = true;
    NoiseVariant variant = NoiseVariant::PatchAdversarial;
    /// Subtract each residual's / noise patch's spatial mean before the noise
    /// discriminator sees it.
    bool center_residuals = true;
    int64_t checkpoint_every = 10;  // epochs; 0 writes only the final checkpoint
    LossWeights weights;
    NetworkConfig network;

    /// Throws ConfigError, including for noise_loss=off with variant=gaussian_kl.
    void validate() const;

    bool uses_noise_discriminator() const {
        return noise_loss && variant == NoiseVariant::PatchAdversarial;
    }
    bool uses_kl_head() const { return noise_loss && variant == NoiseVariant::GaussianKl; }

    bool operator==(const TrainConfig&) const = default;
};

}  // namespace despeckle
