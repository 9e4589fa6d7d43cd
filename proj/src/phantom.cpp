#include "despeckle/phantom.hpp"

#include "despeckle/errors.hpp"
#include "despeckle/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace despeckle {

namespace {

constexpr double kBandTop = 0.15;
constexpr double kBandBottom = 0.60;
constexpr double kAmplitude = 0.03;

}  // namespace

void PhantomConfig::validate() const {
    if (height < 16 || width < 16) throw ConfigError("phantom must be at least 16x16");
    if (layer_means.empty()) throw ConfigError("phantom needs at least one layer");
    for (size_t k = 0; k < layer_means.size(); ++k) {
        if (!(layer_means[k] > 0.0 && layer_means[k] <= 1.0)) {
            throw ConfigError("layer reflectivity must lie in (0,1]");
        }
        if (k > 0 && layer_means[k] > layer_means[k - 1]) {
            throw ConfigError("layer means must be non-increasing from top to bottom");
        }
    }
    if (!(background_mean >= 0.0 && background_mean <= 1.0)) {
        throw ConfigError("background mean must lie in [0,1]");
    }
    if (!(looks >= 1.0)) throw ConfigError("speckle looks L must be >= 1");
    const double spacing = (kBandBottom - kBandTop) * static_cast<double>(height) /
                           static_cast<double>(layer_means.size());
    if (spacing <= 2.0 * kAmplitude * static_cast<double>(height) + 2.0) {
        throw ConfigError("too many layers for the phantom height");
    }
}

Phantom generate_phantom(const PhantomConfig& config) {
    config.validate();
    const auto h = static_cast<double>(config.height);
    const int64_t n_layers = static_cast<int64_t>(config.layer_means.size());

    std::mt19937_64 rng(derive_seed(config.seed, "phantom-geometry"));
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> jitter(-0.4, 0.4);
    std::uniform_real_distribution<double> period_scale(0.35, 0.7);
    const double common_phase = phase(rng);
    const double period = period_scale(rng) * static_cast<double>(config.width);

    Phantom out;
    out.boundary_row = config.height * 2 / 3;
    out.interfaces.resize(static_cast<size_t>(n_layers + 1));
    for (int64_t k = 0; k <= n_layers; ++k) {
        const double base = h * (kBandTop + (kBandBottom - kBandTop) * static_cast<double>(k) /
                                                static_cast<double>(n_layers));
        const double phi = common_phase + jitter(rng);
        auto& line = out.interfaces[static_cast<size_t>(k)];
        line.resize(static_cast<size_t>(config.width));
        for (int64_t c = 0; c < config.width; ++c) {
            line[static_cast<size_t>(c)] =
                base + kAmplitude * h *
                           std::sin(2.0 * std::numbers::pi * static_cast<double>(c) / period + phi);
        }
    }

    out.clean = Image(config.height, config.width, config.background_mean);
    for (int64_t c = 0; c < config.width; ++c) {
        for (int64_t k = 0; k < n_layers; ++k) {
            const double upper = out.interfaces[static_cast<size_t>(k)][static_cast<size_t>(c)];
            const double lower =
                out.interfaces[static_cast<size_t>(k + 1)][static_cast<size_t>(c)];
            const auto r0 = static_cast<int64_t>(std::ceil(upper));
            const auto r1 = static_cast<int64_t>(std::ceil(lower));
            for (int64_t r = std::max<int64_t>(r0, 0); r < std::min(r1, config.height); ++r) {
                out.clean(r, c) = config.layer_means[static_cast<size_t>(k)];
            }
        }
    }
    return out;
}

Image sample_speckle_gain(int64_t height, int64_t width, double looks, uint64_t seed) {
    if (!(looks >= 1.0)) throw ConfigError("speckle looks L must be >= 1");
    std::mt19937_64 rng(derive_seed(seed, "speckle"));
    std::gamma_distribution<double> gain(looks, 1.0 / looks);
    Image g(height, width);
    for (double& v : g.pixels()) v = gain(rng);
    return g;
}

Image apply_speckle(const Image& clean, double looks, uint64_t seed) {
    Image noisy = sample_speckle_gain(clean.height(), clean.width(), looks, seed);
    auto px = noisy.pixels();
    auto src = clean.pixels();
    for (size_t i = 0; i < px.size(); ++i) px[i] = std::clamp(src[i] * px[i], 0.0, 1.0);
    return noisy;
}

RoiSpec phantom_rois(const Phantom& phantom) {
    const int64_t h = phantom.clean.height();
    const int64_t w = phantom.clean.width();
    const auto n_layers = static_cast<int64_t>(phantom.interfaces.size()) - 1;
    const int64_t roi_w = std::max<int64_t>(w / 10, 4);
    const int64_t margin = 2;

    RoiSpec spec;
    spec.info_boundary_row = phantom.boundary_row;
    for (int64_t k = 0; k < n_layers; ++k) {
        const int64_t center = w * (k + 1) / (n_layers + 1);
        const int64_t left = std::clamp<int64_t>(center - roi_w / 2, 0, w - roi_w);
        double upper = -1e300;
        double lower = 1e300;
        for (int64_t c = left; c < left + roi_w; ++c) {
            upper = std::max(upper, phantom.interfaces[static_cast<size_t>(k)][static_cast<size_t>(c)]);
            lower = std::min(lower, phantom.interfaces[static_cast<size_t>(k + 1)][static_cast<size_t>(c)]);
        }
        const auto top = static_cast<int64_t>(std::ceil(upper)) + margin;
        const auto bottom = static_cast<int64_t>(std::ceil(lower)) - margin;  // exclusive
        if (bottom - top < 2) {
            throw ConfigError("phantom layer " + std::to_string(k) + " too thin for an ROI");
        }
        spec.signal_rois.push_back({top, left, bottom - top, roi_w});
    }
    const int64_t bg_rows = h - phantom.boundary_row;
    spec.background_roi = {phantom.boundary_row + bg_rows / 4, w / 4, std::max<int64_t>(bg_rows / 2, 1),
                           w / 2};
    return spec;
}

}  // namespace despeckle
