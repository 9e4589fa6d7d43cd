#pragma once

#include "despeckle/image.hpp"
#include "despeckle/metrics.hpp"

#include <cstdint>
#include <vector>

namespace despeckle {

/// Layered retina-like test fixture. Layers occupy a band in the upper part of
/// the image; everything below `boundary_row` is homogeneous background.
struct PhantomConfig {
    int64_t height = 450;
    int64_t width = 900;
    std::vector<double> layer_means{0.8, 0.5, 0.3};  // top to bottom, non-increasing
    double background_mean = 0.05;
    double looks = 1.0;  // speckle looks L
    uint64_t seed = 0;

    void validate() const;
};

struct Phantom {
    Image clean;
    int64_t boundary_row = 0;
    /// interfaces[k][c]: row where layer k starts in column c; the last entry
    /// is the lower edge of the bottom layer.
    std::vector<std::vector<double>> interfaces;
};

/// Piecewise-constant layers with sinusoidal interfaces between 15% and 63%
/// of the height; boundary_row = floor(2H/3). Vitreous above the first
/// interface and everything below the last one take the background mean.
Phantom generate_phantom(const PhantomConfig& config);

/// Per-pixel unit-mean gamma gains (shape L, scale 1/L).
Image sample_speckle_gain(int64_t height, int64_t width, double looks, uint64_t seed);

/// noisy = clip(clean * g, 0, 1) with g from sample_speckle_gain.
Image apply_speckle(const Image& clean, double looks, uint64_t seed);

/// One signal ROI per layer (kept clear of the undulating interfaces) plus a
/// background ROI below the boundary row.
RoiSpec phantom_rois(const Phantom& phantom);

}  // namespace despeckle
