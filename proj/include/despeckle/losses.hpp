#pragma once

#include "despeckle/networks.hpp"
#include "despeckle/settings.hpp"

#include <torch/torch.h>

#include <string>
#include <utility>
#include <vector>

namespace despeckle {

/// Every image of one training step. x is noisy, y clean, n a batch of
/// background noise patches (may be undefined when no noise loss is used).
struct TranslationBundle {
    torch::Tensor x, y, n;
    torch::Tensor x_clean;  // G_C(E_C(x))
    torch::Tensor y_noisy;  // G_N(E_C(y), E_N(x))
    torch::Tensor x_recon;  // G_N(E_C(x), E_N(x))
    torch::Tensor y_recon;  // G_C(E_C(y))
    torch::Tensor x_cycle;  // G_N(E_C(x_clean), E_N(y_noisy))
    torch::Tensor y_cycle;  // G_C(E_C(y_noisy))
    NoiseCode noise_x;        // E_N(x)
    NoiseCode noise_y_noisy;  // E_N(y_noisy)
};

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy of sigmoid(logits) against an all-real or
/// all-fake target, with probabilities clamped to [1e-7, 1 - 1e-7].
/// Non-finite logits raise NumericError naming `what`.
torch::Tensor bce_loss(const torch::Tensor& logits, bool real, const std::string& what);

/// A pair of adversarial sub-losses (clean/noisy domain, or the x/y noise
/// residuals).
struct AdversarialPair {
    torch::Tensor first;
    torch::Tensor second;
    torch::Tensor sum() const { return first + second; }
};

struct AdversarialLosses {
    AdversarialPair discriminator;  // maximized by D (BCE form, minimized here)
    torch::Tensor generator;        // non-saturating form for E/G
};

/// Clean-domain: y real, x_clean fake. Noisy-domain: x real, y_noisy fake.
/// Fakes are detached for the discriminator terms.
AdversarialPair domain_discriminator_loss(PatchDiscriminator& clean_d, PatchDiscriminator& noisy_d,
                                          const TranslationBundle& bundle);
torch::Tensor domain_generator_loss(PatchDiscriminator& clean_d, PatchDiscriminator& noisy_d,
                                    const TranslationBundle& bundle);
AdversarialLosses domain_adversarial_losses(PatchDiscriminator& clean_d,
                                            PatchDiscriminator& noisy_d,
                                            const TranslationBundle& bundle);

/// Estimated noises (x - x_clean) and (y_noisy - y), optionally centered.
std::pair<torch::Tensor, torch::Tensor> estimated_noise(const TranslationBundle& bundle,
                                                        bool center);

/// Noise patches n are real, both estimated noises fake. Missing n raises
/// ConfigError.
AdversarialPair noise_discriminator_loss(PatchDiscriminator& noise_d,
                                         const TranslationBundle& bundle, bool center);
torch::Tensor noise_generator_loss(PatchDiscriminator& noise_d, const TranslationBundle& bundle,
                                   bool center);
AdversarialLosses noise_adversarial_losses(PatchDiscriminator& noise_d,
                                           const TranslationBundle& bundle, bool center);

/// mean|x - x_cycle| + mean|y - y_cycle|.
torch::Tensor cycle_loss(const TranslationBundle& bundle);
/// mean|x - x_recon| + mean|y - y_recon|.
torch::Tensor reconstruction_loss(const TranslationBundle& bundle);
/// mean|a - a_hat| + mean|b - b_hat| with shape checks.
torch::Tensor paired_l1(const torch::Tensor& a, const torch::Tensor& a_hat,
                        const torch::Tensor& b, const torch::Tensor& b_hat, const char* what);

/// KL(N(mean, exp(logvar)) || N(0, I)), summed over code dims, averaged over
/// the batch.
torch::Tensor kl_noise_loss(const torch::Tensor& mean, const torch::Tensor& logvar);

/// Generator-side terms; `noise` holds the noise adversarial term or the KL
/// term depending on the variant, undefined when the noise loss is off.
struct GeneratorTerms {
    torch::Tensor adversarial;
    torch::Tensor cycle;
    torch::Tensor recon;
    torch::Tensor noise;
};

struct DiscriminatorTerms {
    torch::Tensor clean_domain;
    torch::Tensor noisy_domain;
    torch::Tensor noise;  // undefined unless the noise discriminator is active
};

/// Named scalar terms of one step, with the weight each contributes to
/// total_g (0 for discriminator terms).
struct LossReport {
    struct Term {
        std::string name;
        double value = 0.0;
        double weight = 0.0;
        bool generator = false;
    };
    std::vector<Term> terms;
    double total_g = 0.0;
    double total_d = 0.0;

    bool has(const std::string& name) const;
    double at(const std::string& name) const;
    std::vector<std::string> active() const;
};

struct Objective {
    torch::Tensor total_g;
    torch::Tensor total_d;
    LossReport report;
};

/// total_g = domain_adv * adversarial + cycle * L_cycle + recon * L_recon
///         + noise * (noise adversarial or KL term);
/// total_d = sum of the discriminator terms. Report totals are re-summed in
/// double from the recorded components. Any non-finite component raises
/// NumericError naming it.
Objective total_objective(const GeneratorTerms& g, const DiscriminatorTerms& d,
                          const LossWeights& weights, bool noise_loss, NoiseVariant variant);

torch::Tensor discriminator_total(const DiscriminatorTerms& d);

/// Throws NumericError when `t` holds a non-finite value.
void require_finite(const torch::Tensor& t, const std::string& what);

}  // namespace despeckle
