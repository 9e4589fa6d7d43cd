#include "despeckle/errors.hpp"
#include "despeckle/metrics.hpp"
#include "despeckle/phantom.hpp"

#include <doctest.h>

#include <cmath>

using namespace despeckle;

namespace {

RoiSpec whole_image_background(int64_t h, int64_t w) {
    RoiSpec s;
    s.signal_rois = {{0, 0, 1, 1}};
    s.background_roi = {1, 0, h - 1, w};
    s.info_boundary_row = 1;
    return s;
}

// ENL of min(mean * g, 1) with g ~ Exp(1), in closed form: with c = 1/mean,
// E[min(g,c)] = 1 - e^-c and E[min(g,c)^2] = 2 - (2c + 2) e^-c.
double clipped_single_look_enl(double mean) {
    const double c = 1.0 / mean;
    const double m1 = 1.0 - std::exp(-c);
    const double m2 = 2.0 - (2.0 * c + 2.0) * std::exp(-c);
    return m1 * m1 / (m2 - m1 * m1);
}

}  // namespace

TEST_CASE("default phantom geometry and values") {
    PhantomConfig cfg;
    cfg.seed = 7;
    auto p = generate_phantom(cfg);
    CHECK(p.clean.height() == 450);
    CHECK(p.clean.width() == 900);
    CHECK(p.boundary_row == 300);

    // every pixel is one of the configured values
    for (double v : p.clean.pixels()) {
        const bool known = v == 0.8 || v == 0.5 || v == 0.3 || v == 0.05;
        REQUIRE(known);
    }
    // rows at and below the boundary are pure background
    for (int64_t r = p.boundary_row; r < 450; ++r)
        for (int64_t c = 0; c < 900; ++c) REQUIRE(p.clean(r, c) == 0.05);

    auto rois = phantom_rois(p);
    rois.validate(450, 900);
    const double means[] = {0.8, 0.5, 0.3};
    REQUIRE(rois.signal_rois.size() == 3);
    for (size_t k = 0; k < 3; ++k) {
        const auto& r = rois.signal_rois[k];
        for (int64_t y = r.top; y < r.top + r.height; ++y)
            for (int64_t x = r.left; x < r.left + r.width; ++x) REQUIRE(p.clean(y, x) == means[k]);
    }
    CHECK(rois.background_roi.top >= p.boundary_row);
}

TEST_CASE("phantom generation is deterministic in the seed") {
    PhantomConfig cfg;
    cfg.seed = 11;
    CHECK(generate_phantom(cfg).clean == generate_phantom(cfg).clean);
    auto other = cfg;
    other.seed = 12;
    CHECK_FALSE(generate_phantom(cfg).clean == generate_phantom(other).clean);
    CHECK(apply_speckle(generate_phantom(cfg).clean, 1.0, 3) ==
          apply_speckle(generate_phantom(cfg).clean, 1.0, 3));
}

TEST_CASE("phantom config validation") {
    PhantomConfig cfg;
    cfg.layer_means = {0.3, 0.5};
    CHECK_THROWS_AS(generate_phantom(cfg), ConfigError);
    cfg.layer_means = {0.8, 0.0};
    CHECK_THROWS_AS(generate_phantom(cfg), ConfigError);
    cfg = PhantomConfig{};
    cfg.looks = 0.5;
    CHECK_THROWS_AS(generate_phantom(cfg), ConfigError);
    CHECK_THROWS_AS(apply_speckle(Image(4, 4, 0.1), 0.5, 1), ConfigError);
}

TEST_CASE("speckle: zero stays zero and very many looks leave the image unchanged") {
    PhantomConfig cfg;
    auto p = generate_phantom(cfg);
    auto z = apply_speckle(Image(64, 64, 0.0), 1.0, 4);
    for (double v : z.pixels()) REQUIRE(v == 0.0);

    auto near = apply_speckle(p.clean, 1e6, 5);
    double worst = 0.0;
    for (size_t i = 0; i < near.pixels().size(); ++i)
        worst = std::max(worst, std::abs(near.pixels()[i] - p.clean.pixels()[i]));
    CHECK(worst < 0.01);
}

TEST_CASE("speckle is unit-mean before clipping") {
    for (double looks : {1.0, 4.0, 16.0}) {
        auto g = sample_speckle_gain(400, 500, looks, 9);
        double sum = 0.0;
        for (double v : g.pixels()) sum += v;
        CHECK(sum / static_cast<double>(g.size()) == doctest::Approx(1.0).epsilon(0.01));
    }
    // at a dark level clipping is negligible, so the noisy mean tracks the clean one
    auto noisy = apply_speckle(Image(400, 500, 0.05), 4.0, 10);
    double sum = 0.0;
    for (double v : noisy.pixels()) sum += v;
    CHECK(sum / static_cast<double>(noisy.size()) == doctest::Approx(0.05).epsilon(0.01));
}

TEST_CASE("single-look gain field has ENL one") {
    auto g = sample_speckle_gain(400, 500, 1.0, 21);
    CHECK(*enl(g, whole_image_background(400, 500)).value == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("single-look speckle on a 0.2 region matches the clipped closed form") {
    // Clipping at 1 removes the tail above 5x the mean, so the measured ENL is
    // about 1.058 rather than exactly 1.
    auto noisy = apply_speckle(Image(400, 500, 0.2), 1.0, 22);
    const double measured = *enl(noisy, whole_image_background(400, 500)).value;
    CHECK(measured == doctest::Approx(clipped_single_look_enl(0.2)).epsilon(0.02));
}

TEST_CASE("measured ENL tracks the number of looks") {
    for (double looks : {1.0, 4.0, 16.0}) {
        auto noisy = apply_speckle(Image(400, 500, 0.2), looks, 30 + static_cast<uint64_t>(looks));
        const double measured = *enl(noisy, whole_image_background(400, 500)).value;
        CAPTURE(looks);
        CHECK(std::abs(measured - looks) <= 0.1 * looks);
    }
}
