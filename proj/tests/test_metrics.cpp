#include "despeckle/errors.hpp"
#include "despeckle/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace despeckle;

namespace {

// Two-column image: row 0 holds the signal pair, row 2 the background pair.
// A pair {m - s, m + s} has mean m and population sd s.
struct Pairs {
    Image image{3, 2};
    RoiSpec spec;
};

Pairs pairs(double sig_mean, double sig_sd, double bg_mean, double bg_sd) {
    Pairs p;
    p.image(0, 0) = sig_mean - sig_sd;
    p.image(0, 1) = sig_mean + sig_sd;
    p.image(1, 0) = p.image(1, 1) = 0.0;
    p.image(2, 0) = bg_mean - bg_sd;
    p.image(2, 1) = bg_mean + bg_sd;
    p.spec.signal_rois = {{0, 0, 1, 2}};
    p.spec.background_roi = {2, 0, 1, 2};
    p.spec.info_boundary_row = 3;
    return p;
}

}  // namespace

TEST_CASE("CNR hand examples") {
    auto p = pairs(10, 3, 2, 4);
    auto v = cnr(p.image, p.spec);
    REQUIRE(v.is_defined());
    CHECK(*v.value == doctest::Approx(10.0 * std::log10(8.0 / 5.0)).epsilon(1e-12));
    CHECK(*v.value == doctest::Approx(2.0412).epsilon(1e-4));

    auto zero = pairs(7, 3, 2, 4);  // contrast 5 over spread 5
    CHECK(*cnr(zero.image, zero.spec).value == 0.0);

    auto below = pairs(1, 3, 2, 4);
    auto u = cnr(below.image, below.spec);
    CHECK_FALSE(u.is_defined());
    CHECK(u.undefined_reason.find("#1") != std::string::npos);
}

TEST_CASE("MSR hand examples") {
    Image im(3, 2);
    im(0, 0) = 2; im(0, 1) = 6;    // 4 +- 2
    im(1, 0) = 6; im(1, 1) = 12;   // 9 +- 3
    im(2, 0) = 0; im(2, 1) = 1;
    RoiSpec s;
    s.signal_rois = {{0, 0, 1, 2}, {1, 0, 1, 2}};
    s.background_roi = {2, 0, 1, 2};
    s.info_boundary_row = 3;
    CHECK(*msr(im, s).value == doctest::Approx(2.5).epsilon(1e-12));

    auto eq = pairs(3, 3, 0, 1);
    CHECK(*msr(eq.image, eq.spec).value == 1.0);

    auto flat = pairs(3, 0, 0, 1);
    CHECK_FALSE(msr(flat.image, flat.spec).is_defined());
}

TEST_CASE("ENL hand examples") {
    auto p = pairs(10, 1, 6, 3);
    CHECK(*enl(p.image, p.spec).value == 4.0);
    auto flat = pairs(10, 1, 6, 0);
    CHECK_FALSE(enl(flat.image, flat.spec).is_defined());
}

TEST_CASE("ENL of exponential speckle is one") {
    std::mt19937_64 rng(2024);
    std::exponential_distribution<double> expo(1.0);
    Image im(1000, 1001);
    for (auto& v : im.pixels()) v = expo(rng);
    RoiSpec s;
    s.signal_rois = {{0, 0, 1, 1}};
    s.background_roi = {1, 0, 999, 1001};
    s.info_boundary_row = 1;
    CHECK(*enl(im, s).value == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("EPI hand examples") {
    Image noisy(2, 2), den(2, 2);
    noisy(1, 0) = noisy(1, 1) = 2;
    den(1, 0) = den(1, 1) = 1;
    RoiSpec s;
    s.signal_rois = {{0, 0, 1, 1}};
    s.background_roi = {1, 1, 1, 1};
    s.info_boundary_row = 2;
    CHECK(*epi(den, noisy, s).value == 0.5);
    CHECK(*epi(noisy, noisy, s).value == 1.0);
    CHECK(*epi(Image(2, 2, 0.3), noisy, s).value == 0.0);
    CHECK_FALSE(epi(noisy, Image(2, 2, 0.3), s).is_defined());
    CHECK_THROWS_AS(epi(Image(3, 2), noisy, s), DimensionError);
}

TEST_CASE("EPI ignores rows below the information boundary") {
    std::mt19937_64 rng(8);
    auto noisy = testing::random_image(10, 6, rng);
    auto den = noisy;
    RoiSpec s;
    s.signal_rois = {{0, 0, 2, 2}};
    s.background_roi = {8, 0, 2, 2};
    s.info_boundary_row = 5;
    for (int64_t r = 5; r < 10; ++r)
        for (int64_t c = 0; c < 6; ++c) den(r, c) = 0.9;
    CHECK(*epi(den, noisy, s).value == 1.0);
}

TEST_CASE("metrics agree with naive loops on random images") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        auto spec = oracle::random_rois(64, 64, rng);
        auto im = oracle::random_scene(64, 64, spec, rng);
        auto noisy = testing::random_image(64, 64, rng);
        const auto c = cnr(im, spec), m = msr(im, spec), n = enl(im, spec), e = epi(im, noisy, spec);
        REQUIRE(c.is_defined());
        REQUIRE(oracle::rel(*c.value, *oracle::cnr(im, spec)) <= 1e-9);
        REQUIRE(oracle::rel(*m.value, *oracle::msr(im, spec)) <= 1e-9);
        REQUIRE(oracle::rel(*n.value, *oracle::enl(im, spec)) <= 1e-9);
        REQUIRE(oracle::rel(*e.value, *oracle::epi(im, noisy, spec)) <= 1e-9);
    }
}

TEST_CASE("scale and shift invariances") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> kdist(0.1, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        auto spec = oracle::random_rois(48, 40, rng);
        auto im = oracle::random_scene(48, 40, spec, rng);
        auto noisy = testing::random_image(48, 40, rng);
        const double k = kdist(rng), shift = kdist(rng) - 2.0;
        Image scaled = im, shifted = im, noisy_shifted = noisy;
        for (auto& v : scaled.pixels()) v *= k;
        for (auto& v : shifted.pixels()) v += shift;
        for (auto& v : noisy_shifted.pixels()) v += shift;

        CHECK(oracle::rel(*cnr(scaled, spec).value, *cnr(im, spec).value) <= 1e-9);
        CHECK(oracle::rel(*msr(scaled, spec).value, *msr(im, spec).value) <= 1e-9);
        CHECK(oracle::rel(*enl(scaled, spec).value, *enl(im, spec).value) <= 1e-9);
        CHECK(oracle::rel(*epi(shifted, noisy_shifted, spec).value, *epi(im, noisy, spec).value) <=
              1e-9);
        CHECK(*epi(noisy, noisy, spec).value == 1.0);
        CHECK(*epi(im, noisy, spec).value >= 0.0);
    }
}

TEST_CASE("ROI validation") {
    auto p = pairs(10, 3, 2, 4);
    auto s = p.spec;
    s.background_roi = {2, 1, 1, 2};
    CHECK_THROWS_AS(cnr(p.image, s), DimensionError);
    s = p.spec;
    s.signal_rois.clear();
    CHECK_THROWS_AS(cnr(p.image, s), ConfigError);
    s = p.spec;
    s.signal_rois = {{1, 0, 2, 2}};
    CHECK_THROWS_AS(msr(p.image, s), ConfigError);
    s = p.spec;
    s.info_boundary_row = 4;
    CHECK_THROWS_AS(evaluate_image("x", p.image, p.image, s), DimensionError);
}

TEST_CASE("evaluate_set means, undefined counting and missing ROIs") {
    auto a = pairs(10, 3, 2, 4);
    auto b = pairs(7, 3, 2, 4);
    auto flat = pairs(10, 3, 2, 0);
    std::map<std::string, RoiSpec> rois{{"a", a.spec}, {"b", b.spec}, {"f", flat.spec}};

    auto one = evaluate_set({{"a", a.image, a.image}}, rois);
    CHECK(*one.cnr.value == *one.rows[0].cnr.value);

    auto two = evaluate_set({{"a", a.image, a.image}, {"b", b.image, b.image}}, rois);
    CHECK(*two.cnr.value == doctest::Approx((*two.rows[0].cnr.value + 0.0) / 2).epsilon(1e-12));
    CHECK(two.cnr.defined_count == 2);

    auto with_flat = evaluate_set({{"a", a.image, a.image}, {"f", flat.image, flat.image}}, rois);
    CHECK(with_flat.enl.defined_count == 1);
    CHECK(with_flat.enl.undefined_count == 1);
    CHECK(*with_flat.enl.value == *with_flat.rows[0].enl.value);

    CHECK_THROWS_AS(evaluate_set({{"zzz", a.image, a.image}}, rois), MissingInputError);
}

TEST_CASE("ROI config text round trip") {
    std::map<std::string, RoiSpec> cfg;
    RoiSpec s;
    s.signal_rois = {{10, 20, 30, 40}, {50, 60, 7, 8}};
    s.background_roi = {300, 0, 100, 200};
    s.info_boundary_row = 290;
    cfg["img_01"] = s;
    const auto text = format_roi_config(cfg);
    CHECK(parse_roi_config("# header\n" + text) == cfg);
    CHECK_THROWS_AS(parse_roi_config("img 12 1,2,3\n"), ConfigError);
}

TEST_CASE("report formatting keeps the CNR MSR EPI ENL column order") {
    auto a = pairs(10, 3, 2, 0);
    auto table = evaluate_set({{"a", a.image, a.image}}, {{"a", a.spec}});
    const auto text = format_metric_table(table);
    CHECK(text.rfind("image_id\tCNR\tMSR\tEPI\tENL", 0) == 0);
    CHECK(text.find("undefined") != std::string::npos);
    CHECK(text.find("nan") == std::string::npos);
}
