#include "despeckle/losses.hpp"

#include "despeckle/errors.hpp"

#include <cmath>
#include <sstream>

namespace despeckle {

void require_finite(const torch::Tensor& t, const std::string& what) {
    if (!t.defined()) return;
    const auto finite = torch::isfinite(t);
    if (!finite.all().item<bool>()) {
        const auto bad = (finite.numel() - finite.sum().item<int64_t>());
        throw NumericError(what + ": " + std::to_string(bad) + " of " +
                           std::to_string(finite.numel()) + " values are not finite");
    }
}

torch::Tensor bce_loss(const torch::Tensor& logits, bool real, const std::string& what) {
    require_finite(logits, what + " logits");
    const auto p = torch::sigmoid(logits).clamp(kProbabilityClamp, 1.0 - kProbabilityClamp);
    return real ? -torch::log(p).mean() : -torch::log1p(-p).mean();
}

AdversarialPair domain_discriminator_loss(PatchDiscriminator& clean_d, PatchDiscriminator& noisy_d,
                                          const TranslationBundle& b) {
    AdversarialPair out;
    out.first = bce_loss(clean_d(b.y), true, "D_C(y)") +
                bce_loss(clean_d(b.x_clean.detach()), false, "D_C(x_clean)");
    out.second = bce_loss(noisy_d(b.x), true, "D_N(x)") +
                 bce_loss(noisy_d(b.y_noisy.detach()), false, "D_N(y_noisy)");
    return out;
}

torch::Tensor domain_generator_loss(PatchDiscriminator& clean_d, PatchDiscriminator& noisy_d,
                                    const TranslationBundle& b) {
    return bce_loss(clean_d(b.x_clean), true, "D_C(x_clean)") +
           bce_loss(noisy_d(b.y_noisy), true, "D_N(y_noisy)");
}

AdversarialLosses domain_adversarial_losses(PatchDiscriminator& clean_d,
                                            PatchDiscriminator& noisy_d,
                                            const TranslationBundle& b) {
    return {domain_discriminator_loss(clean_d, noisy_d, b), domain_generator_loss(clean_d, noisy_d, b)};
}

namespace {

torch::Tensor centered(const torch::Tensor& t, bool center) {
    return center ? t - t.mean({2, 3}, true) : t;
}

void require_noise_patches(const TranslationBundle& b) {
    if (!b.n.defined() || b.n.numel() == 0) {
        throw ConfigError("noise adversarial loss needs a batch of noise patches");
    }
}

}  // namespace

std::pair<torch::Tensor, torch::Tensor> estimated_noise(const TranslationBundle& b, bool center) {
    return {centered(b.x - b.x_clean, center), centered(b.y_noisy - b.y, center)};
}

AdversarialPair noise_discriminator_loss(PatchDiscriminator& noise_d, const TranslationBundle& b,
                                         bool center) {
    require_noise_patches(b);
    auto [rx, ry] = estimated_noise(b, center);
    const auto real = bce_loss(noise_d(centered(b.n, center)), true, "D_PN(n)");
    return {real + bce_loss(noise_d(rx.detach()), false, "D_PN(x - x_clean)"),
            real + bce_loss(noise_d(ry.detach()), false, "D_PN(y_noisy - y)")};
}

torch::Tensor noise_generator_loss(PatchDiscriminator& noise_d, const TranslationBundle& b,
                                   bool center) {
    require_noise_patches(b);
    auto [rx, ry] = estimated_noise(b, center);
    return bce_loss(noise_d(rx), true, "D_PN(x - x_clean)") +
           bce_loss(noise_d(ry), true, "D_PN(y_noisy - y)");
}

AdversarialLosses noise_adversarial_losses(PatchDiscriminator& noise_d, const TranslationBundle& b,
                                           bool center) {
    return {noise_discriminator_loss(noise_d, b, center), noise_generator_loss(noise_d, b, center)};
}

torch::Tensor paired_l1(const torch::Tensor& a, const torch::Tensor& a_hat,
                        const torch::Tensor& b, const torch::Tensor& b_hat, const char* what) {
    for (const auto& [u, v] : {std::pair{&a, &a_hat}, std::pair{&b, &b_hat}}) {
        if (!u->defined() || !v->defined()) {
            throw ConfigError(std::string(what) + ": bundle image not populated");
        }
        if (u->sizes() != v->sizes()) {
            std::ostringstream os;
            os << what << ": shape mismatch " << u->sizes() << " vs " << v->sizes();
            throw ShapeError(os.str());
        }
    }
    return (a - a_hat).abs().mean() + (b - b_hat).abs().mean();
}

torch::Tensor cycle_loss(const TranslationBundle& b) {
    return paired_l1(b.x, b.x_cycle, b.y, b.y_cycle, "cycle loss");
}

torch::Tensor reconstruction_loss(const TranslationBundle& b) {
    return paired_l1(b.x, b.x_recon, b.y, b.y_recon, "reconstruction loss");
}

torch::Tensor kl_noise_loss(const torch::Tensor& mean, const torch::Tensor& logvar) {
    if (mean.sizes() != logvar.sizes() || mean.dim() != 2) {
        throw ShapeError("kl_noise_loss: mean and logvar must both be (B, d_n)");
    }
    return (0.5 * (mean.square() + logvar.exp() - logvar - 1.0)).sum(1).mean();
}

bool LossReport::has(const std::string& name) const {
    for (const auto& t : terms)
        if (t.name == name) return true;
    return false;
}

double LossReport::at(const std::string& name) const {
    for (const auto& t : terms)
        if (t.name == name) return t.value;
    throw ConfigError("loss report has no term '" + name + "'");
}

std::vector<std::string> LossReport::active() const {
    std::vector<std::string> out;
    for (const auto& t : terms) out.push_back(t.name);
    return out;
}

torch::Tensor discriminator_total(const DiscriminatorTerms& d) {
    auto total = d.clean_domain + d.noisy_domain;
    if (d.noise.defined()) total = total + d.noise;
    return total;
}

Objective total_objective(const GeneratorTerms& g, const DiscriminatorTerms& d,
                          const LossWeights& weights, bool noise_loss, NoiseVariant variant) {
    weights.validate();
    Objective out;
    auto& report = out.report;
    auto add = [&](const std::string& name, const torch::Tensor& t, double weight, bool gen) {
        if (!t.defined()) throw ConfigError("loss term '" + name + "' was not computed");
        const double v = t.item<double>();
        if (!std::isfinite(v)) throw NumericError("loss term '" + name + "' is not finite");
        report.terms.push_back({name, v, weight, gen});
    };

    add("adv_g", g.adversarial, weights.domain_adv, true);
    add("cycle", g.cycle, weights.cycle, true);
    add("recon", g.recon, weights.recon, true);
    out.total_g = weights.domain_adv * g.adversarial + weights.cycle * g.cycle +
                  weights.recon * g.recon;
    if (noise_loss) {
        const std::string name = variant == NoiseVariant::GaussianKl ? "kl" : "noise_g";
        add(name, g.noise, weights.noise, true);
        out.total_g = out.total_g + weights.noise * g.noise;
    }

    add("adv_d_clean", d.clean_domain, 0.0, false);
    add("adv_d_noisy", d.noisy_domain, 0.0, false);
    if (noise_loss && variant == NoiseVariant::PatchAdversarial) {
        add("noise_d", d.noise, 0.0, false);
    }
    out.total_d = discriminator_total(d);

    for (const auto& t : report.terms) {
        if (t.generator) report.total_g += t.weight * t.value;
        else report.total_d += t.value;
    }
    return out;
}

}  // namespace despeckle
