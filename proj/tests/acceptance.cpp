// Acceptance run: one PASS/FAIL line per criterion. Criteria can be selected
// by number on the command line (e.g. `acceptance 1 2 9`); default is all.
// The phantom training criteria write their runs under $DESPECKLE_ACCEPTANCE_DIR
// (default ./acceptance_runs).

#include "despeckle/config.hpp"
#include "despeckle/dataset_prep.hpp"
#include "despeckle/denoiser.hpp"
#include "despeckle/errors.hpp"
#include "despeckle/losses.hpp"
#include "despeckle/metrics.hpp"
#include "despeckle/networks.hpp"
#include "despeckle/phantom.hpp"
#include "despeckle/pipeline.hpp"
#include "despeckle/trainer.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

using namespace despeckle;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

// Collects failed sub-checks so a criterion reports what went wrong.
struct Checks {
    std::vector<std::string> failures;
    int total = 0;
    void expect(bool ok, const std::string& what) {
        ++total;
        if (!ok) failures.push_back(what);
    }
    Outcome outcome(const std::string& summary) const {
        if (failures.empty()) return {true, summary + " (" + std::to_string(total) + " checks)"};
        std::string msg = std::to_string(failures.size()) + "/" + std::to_string(total) + " failed";
        for (size_t i = 0; i < failures.size() && i < 5; ++i) msg += "; " + failures[i];
        return {false, msg};
    }
};

// ---------------------------------------------------------------- metrics

Image pair_rows(double sig_mean, double sig_sd, double bg_mean, double bg_sd, RoiSpec& spec) {
    Image im(3, 2);
    im(0, 0) = sig_mean - sig_sd;
    im(0, 1) = sig_mean + sig_sd;
    im(2, 0) = bg_mean - bg_sd;
    im(2, 1) = bg_mean + bg_sd;
    spec.signal_rois = {{0, 0, 1, 2}};
    spec.background_roi = {2, 0, 1, 2};
    spec.info_boundary_row = 3;
    return im;
}

Outcome metric_oracles() {
    Checks c;
    std::mt19937_64 rng(20240601);
    for (int trial = 0; trial < 100; ++trial) {
        auto spec = oracle::random_rois(64, 64, rng);
        auto im = oracle::random_scene(64, 64, spec, rng);
        Image noisy(64, 64);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (auto& v : noisy.pixels()) v = u(rng);
        const auto t = "image " + std::to_string(trial);
        const auto vc = cnr(im, spec), vm = msr(im, spec), ve = enl(im, spec), vp = epi(im, noisy, spec);
        c.expect(vc.is_defined() && oracle::rel(*vc.value, *oracle::cnr(im, spec)) <= 1e-9, t + " CNR");
        c.expect(vm.is_defined() && oracle::rel(*vm.value, *oracle::msr(im, spec)) <= 1e-9, t + " MSR");
        c.expect(ve.is_defined() && oracle::rel(*ve.value, *oracle::enl(im, spec)) <= 1e-9, t + " ENL");
        c.expect(vp.is_defined() && oracle::rel(*vp.value, *oracle::epi(im, noisy, spec)) <= 1e-9,
                 t + " EPI");
    }

    RoiSpec s;
    auto im = pair_rows(10, 3, 2, 4, s);
    c.expect(std::abs(*cnr(im, s).value - 10.0 * std::log10(8.0 / 5.0)) <= 1e-12, "CNR 10/3 vs 2/4");
    c.expect(std::abs(*cnr(im, s).value - 2.0412) <= 5e-5, "CNR ~2.0412");
    im = pair_rows(7, 3, 2, 4, s);
    c.expect(*cnr(im, s).value == 0.0, "CNR exactly 0");
    im = pair_rows(1, 3, 2, 4, s);
    c.expect(!cnr(im, s).is_defined(), "CNR undefined below background");

    Image two(3, 2);
    two(0, 0) = 2; two(0, 1) = 6; two(1, 0) = 6; two(1, 1) = 12;
    RoiSpec ms;
    ms.signal_rois = {{0, 0, 1, 2}, {1, 0, 1, 2}};
    ms.background_roi = {2, 0, 1, 2};
    ms.info_boundary_row = 3;
    c.expect(std::abs(*msr(two, ms).value - 2.5) <= 1e-12, "MSR 2.5");
    im = pair_rows(3, 3, 0, 1, s);
    c.expect(*msr(im, s).value == 1.0, "MSR mu = sigma");
    im = pair_rows(3, 0, 0, 1, s);
    c.expect(!msr(im, s).is_defined(), "MSR undefined on a constant ROI");

    im = pair_rows(10, 1, 6, 3, s);
    c.expect(*enl(im, s).value == 4.0, "ENL 6/3");
    im = pair_rows(10, 1, 6, 0, s);
    c.expect(!enl(im, s).is_defined(), "ENL undefined on a constant background");
    {
        std::exponential_distribution<double> expo(1.0);
        Image sp(1000, 1001);
        for (auto& v : sp.pixels()) v = expo(rng);
        RoiSpec es;
        es.signal_rois = {{0, 0, 1, 1}};
        es.background_roi = {1, 0, 999, 1001};
        es.info_boundary_row = 1;
        c.expect(std::abs(*enl(sp, es).value - 1.0) <= 0.05, "ENL of exponential speckle");
    }

    Image noisy(2, 2), den(2, 2);
    noisy(1, 0) = noisy(1, 1) = 2;
    den(1, 0) = den(1, 1) = 1;
    RoiSpec es;
    es.signal_rois = {{0, 0, 1, 1}};
    es.background_roi = {1, 1, 1, 1};
    es.info_boundary_row = 2;
    c.expect(*epi(den, noisy, es).value == 0.5, "EPI 2/4");
    c.expect(*epi(noisy, noisy, es).value == 1.0, "EPI identity");
    c.expect(*epi(Image(2, 2, 0.3), noisy, es).value == 0.0, "EPI constant");
    return c.outcome("100 random images agree with naive loops; hand examples exact");
}

Outcome metric_invariances() {
    Checks c;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> kd(0.1, 5.0), u(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        auto spec = oracle::random_rois(48, 40, rng);
        auto im = oracle::random_scene(48, 40, spec, rng);
        Image noisy(48, 40);
        for (auto& v : noisy.pixels()) v = u(rng);
        const double k = kd(rng), shift = kd(rng) - 2.0;
        Image scaled = im, shifted = im, noisy_shifted = noisy;
        for (auto& v : scaled.pixels()) v *= k;
        for (auto& v : shifted.pixels()) v += shift;
        for (auto& v : noisy_shifted.pixels()) v += shift;
        const double e1 = oracle::rel(*cnr(scaled, spec).value, *cnr(im, spec).value);
        const double e2 = oracle::rel(*msr(scaled, spec).value, *msr(im, spec).value);
        const double e3 = oracle::rel(*enl(scaled, spec).value, *enl(im, spec).value);
        const double e4 = oracle::rel(*epi(shifted, noisy_shifted, spec).value, *epi(im, noisy, spec).value);
        const double e5 = std::abs(*epi(noisy, noisy, spec).value - 1.0);
        worst = std::max({worst, e1, e2, e3, e4, e5});
        const auto t = "trial " + std::to_string(trial);
        c.expect(e1 <= 1e-9, t + " CNR scale");
        c.expect(e2 <= 1e-9, t + " MSR scale");
        c.expect(e3 <= 1e-9, t + " ENL scale");
        c.expect(e4 <= 1e-9, t + " EPI shift");
        c.expect(e5 <= 1e-9, t + " EPI identity");
    }
    return c.outcome("worst relative deviation " + fmt(worst, 3));
}

// ---------------------------------------------------------------- AdaIN

Outcome adain_checks() {
    Checks c;
    auto dbl = torch::TensorOptions().dtype(torch::kDouble);
    {
        auto f = torch::tensor({1.0, 3.0}, dbl).view({1, 1, 1, 2});
        auto out = adain(f, {torch::ones({1, 1}, dbl), torch::zeros({1, 1}, dbl)}, 0.0);
        c.expect(std::abs(out[0][0][0][0].item<double>() + 1.0) <= 1e-12 &&
                     std::abs(out[0][0][0][1].item<double>() - 1.0) <= 1e-12,
                 "[1,3] -> [-1,1]");
        torch::manual_seed(1);
        auto feats = torch::rand({2, 3, 5, 7}, dbl) * 4.0 - 1.0;
        auto [var, mean] = torch::var_mean(feats, {2, 3}, false, false);
        auto id = adain(feats, {var.sqrt() + kAdainEps, mean});
        c.expect(torch::allclose(id, feats, 1e-10, 1e-10), "identity modulation");
        auto flat = adain(torch::full({1, 1, 4, 4}, 0.3, dbl),
                          {torch::full({1, 1}, 5.0, dbl), torch::full({1, 1}, 0.7, dbl)});
        c.expect(torch::allclose(flat, torch::full_like(flat, 0.7)), "constant channel -> beta");
    }
    double mean_err = 0.0, sd_err = 0.0;
    {
        torch::manual_seed(2);
        auto f = torch::randn({4, 8, 16, 16});
        auto gamma = torch::rand({4, 8}) * 2.0 + 0.1;
        auto beta = torch::randn({4, 8});
        auto out = adain(f, {gamma, beta});
        auto [var, mean] = torch::var_mean(out, {2, 3}, false, false);
        mean_err = (mean - beta).abs().max().item<double>();
        sd_err = (var.sqrt() - gamma).abs().max().item<double>();
        c.expect(mean_err <= 1e-4, "per-channel mean = beta");
        c.expect(sd_err <= 1e-3, "per-channel std = gamma");
    }
    double fd_worst = 0.0;
    {
        torch::manual_seed(3);
        auto f = torch::rand({1, 1, 4, 4}, dbl).requires_grad_();
        auto gamma = (torch::rand({1, 1}, dbl) + 0.5).requires_grad_();
        auto beta = torch::randn({1, 1}, dbl).requires_grad_();
        auto w = torch::randn({1, 1, 4, 4}, dbl);
        auto obj = [&] { return (adain(f, {gamma, beta}) * w).sum(); };
        obj().backward();
        const double h = 1e-4;
        for (auto* p : {&f, &gamma, &beta}) {
            torch::NoGradGuard guard;
            auto grad = p->grad().clone().view(-1);
            auto flat = p->view(-1);
            for (int64_t i = 0; i < flat.numel(); ++i) {
                const double orig = flat[i].item<double>();
                flat[i] = orig + h;
                const double up = obj().item<double>();
                flat[i] = orig - h;
                const double down = obj().item<double>();
                flat[i] = orig;
                const double fd = (up - down) / (2 * h);
                const double an = grad[i].item<double>();
                const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
                fd_worst = std::max(fd_worst, rel);
                c.expect(rel <= 1e-3, "finite difference element " + std::to_string(i));
            }
        }
    }
    return c.outcome("mean err " + fmt(mean_err, 2) + ", std err " + fmt(sd_err, 2) +
                     ", worst FD rel err " + fmt(fd_worst, 2));
}

// ---------------------------------------------------------------- losses

Outcome loss_algebra() {
    Checks c;
    const double log4 = std::log(4.0);
    NetworkConfig net;
    net.base_channels = 8;
    net.residual_blocks = 1;
    auto undecided = [&] {
        PatchDiscriminator d(net);
        torch::NoGradGuard guard;
        for (auto& p : d->parameters()) p.zero_();
        return d;
    };
    auto dc = undecided(), dn = undecided(), dp = undecided();
    TranslationBundle b;
    torch::manual_seed(4);
    for (auto* t : {&b.x, &b.y, &b.n, &b.x_clean, &b.y_noisy, &b.x_recon, &b.y_recon, &b.x_cycle,
                    &b.y_cycle}) {
        *t = torch::rand({2, 1, 32, 32});
    }
    auto dom = domain_adversarial_losses(dc, dn, b);
    auto noise = noise_adversarial_losses(dp, b, true);
    double adv_worst = 0.0;
    for (double v : {dom.discriminator.first.item<double>(), dom.discriminator.second.item<double>(),
                     noise.discriminator.first.item<double>(),
                     noise.discriminator.second.item<double>()}) {
        adv_worst = std::max(adv_worst, std::abs(v - log4));
    }
    c.expect(adv_worst <= 1e-6, "adversarial losses at p = 0.5 equal log 4");

    auto sc = [](double v) { return torch::tensor(v, torch::kDouble); };
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    double resum_worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        GeneratorTerms g{sc(u(rng)), sc(u(rng)), sc(u(rng)), sc(u(rng))};
        DiscriminatorTerms d{sc(u(rng)), sc(u(rng)), sc(u(rng))};
        LossWeights w{u(rng), u(rng), u(rng), u(rng)};
        auto obj = total_objective(g, d, w, trial % 3 != 0,
                                   trial % 2 ? NoiseVariant::GaussianKl : NoiseVariant::PatchAdversarial);
        double resum = 0.0;
        for (const auto& t : obj.report.terms)
            if (t.generator) resum += t.weight * t.value;
        resum_worst = std::max(resum_worst, std::abs(resum - obj.total_g.item<double>()));
    }
    c.expect(resum_worst <= 1e-9, "total_G re-summation");
    {
        GeneratorTerms g{sc(0), sc(0.1), sc(0.2), sc(0)};
        DiscriminatorTerms d{sc(0), sc(0), sc(0)};
        c.expect(std::abs(total_objective(g, d, LossWeights{}, true, NoiseVariant::PatchAdversarial)
                              .total_g.item<double>() - 3.0) <= 1e-12,
                 "total_G 10*0.1 + 10*0.2 = 3");
    }

    auto z = torch::zeros({1, 1});
    const double kl0 = kl_noise_loss(z, z).item<double>();
    const double kl1 = kl_noise_loss(torch::ones({1, 1}), z).item<double>();
    const double kl4 = kl_noise_loss(z, torch::full({1, 1}, std::log(4.0))).item<double>();
    c.expect(std::abs(kl0) <= 1e-6, "KL 0");
    c.expect(std::abs(kl1 - 0.5) <= 1e-6, "KL 0.5");
    c.expect(std::abs(kl4 - 0.5 * (4.0 - std::log(4.0) - 1.0)) <= 1e-6 && std::abs(kl4 - 0.8069) <= 1e-4,
             "KL 0.8069");
    return c.outcome("adv dev " + fmt(adv_worst, 2) + ", resum dev " + fmt(resum_worst, 2) +
                     ", KL " + fmt(kl0, 3) + "/" + fmt(kl1, 6) + "/" + fmt(kl4, 6));
}

// ---------------------------------------------------------------- patches

Outcome patch_laws() {
    Checks c;
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int64_t> dim(1, 120), psz(1, 48), str(1, 20);
    for (int trial = 0; trial < 200; ++trial) {
        const int64_t h = dim(rng), w = dim(rng), p = psz(rng), s = str(rng);
        const auto t = "(" + std::to_string(h) + "," + std::to_string(w) + "," + std::to_string(p) +
                       "," + std::to_string(s) + ")";
        auto ex = extract_patches(Image(h, w), p, s);
        const int64_t expect = (h >= p && w >= p) ? ((h - p) / s + 1) * ((w - p) / s + 1) : 0;
        c.expect(static_cast<int64_t>(ex.patches.size()) == expect, "count " + t);
        c.expect(expect > 0 || ex.warnings.size() == 1, "warning " + t);

        ImageSample smp;
        smp.id = "s";
        smp.subject = "s";
        smp.pixels = Image(h, w);
        smp.boundary_row = std::uniform_int_distribution<int64_t>(1, h)(rng);
        auto noise = harvest_noise_patches(smp, p, s);
        const int64_t bg = h - *smp.boundary_row;
        const int64_t nexpect = (bg >= p && w >= p) ? ((bg - p) / s + 1) * ((w - p) / s + 1) : 0;
        c.expect(static_cast<int64_t>(noise.patches.size()) == nexpect, "noise count " + t);
        bool pure = true;
        for (const auto& np : noise.patches) pure = pure && np.offset.row >= *smp.boundary_row;
        c.expect(pure, "noise purity " + t);
    }
    return c.outcome("200 random (H,W,P,S) tuples");
}

// ---------------------------------------------------------------- smoke

TrainConfig reduced_train_config(uint64_t seed) {
    TrainConfig t;
    t.seed = seed;
    t.batch_size = 4;
    t.network.base_channels = 16;
    t.network.residual_blocks = 2;
    return t;
}

Outcome pipeline_smoke() {
    Checks c;
    auto cfg = reduced_train_config(11);
    cfg.batch_size = 2;
    auto gen = at::make_generator<at::CPUGeneratorImpl>(12);
    auto batch = [&] {
        return TripleBatch{torch::rand({2, 1, 64, 64}, gen), torch::rand({2, 1, 64, 64}, gen),
                           torch::rand({2, 1, 64, 64}, gen)};
    };
    Trainer trainer(cfg);
    auto report = trainer.step(batch());
    bool finite = std::isfinite(report.total_g) && std::isfinite(report.total_d);
    for (const auto& t : report.terms) finite = finite && std::isfinite(t.value);
    c.expect(finite, "finite losses");

    auto& m = trainer.model();
    const std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> nets = {
        {"E_C", m.content_encoder.ptr()}, {"E_N", m.noise_encoder.ptr()},
        {"G_C", m.clean_generator.ptr()}, {"G_N", m.noisy_generator.ptr()}};
    for (const auto& [name, net] : nets) {
        for (const auto& p : net->named_parameters()) {
            const auto& g = p.value().grad();
            const bool ok = g.defined() && torch::isfinite(g).all().item<bool>() &&
                            g.abs().max().item<float>() > 0.0f;
            c.expect(ok, name + "." + p.key() + " gradient");
        }
    }

    const auto dir = fs::temp_directory_path() / ("despeckle_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    trainer.save_checkpoint(dir / "smoke.pt");
    auto restored = Trainer::from_checkpoint(dir / "smoke.pt");
    double worst = 0.0;
    for (int i = 0; i < 2; ++i) {
        const auto next = batch();
        auto a = trainer.step(next);
        auto b = restored->step(next);
        c.expect(a.terms.size() == b.terms.size(), "report shape");
        for (size_t k = 0; k < std::min(a.terms.size(), b.terms.size()); ++k) {
            worst = std::max(worst, std::abs(a.terms[k].value - b.terms[k].value));
        }
    }
    c.expect(worst <= 1e-6, "resume equivalence");
    fs::remove_all(dir);
    return c.outcome("max resumed-step deviation " + fmt(worst, 3));
}

// ---------------------------------------------------------------- phantom runs

struct RunMetrics {
    MetricTable noisy, denoised, ideal;
};

ExperimentConfig phantom_experiment(uint64_t seed, bool noise_loss, const fs::path& root) {
    std::vector<std::string> ov = {
        "run.seed=" + std::to_string(seed),
        "phantom.height=450",        "phantom.width=900",      "phantom.looks=1",
        "phantom.train_count=6",     "phantom.test_count=2",   "prepare.crop=off",
        "prepare.patch_size=64",     "prepare.stride=32",      "prepare.noise_stride=16",
        "network.base_channels=16",  "network.residual_blocks=2", "train.batch_size=4",
        "train.epochs=8",            "train.checkpoint_every=0",
        std::string("train.noise_loss=") + (noise_loss ? "on" : "off"),
    };
    auto cfg = parse_config("", ov);
    cfg.output_dir = root / ("seed_" + std::to_string(seed));
    return cfg;
}

class PhantomRuns {
public:
    explicit PhantomRuns(fs::path root) : root_(std::move(root)) {}

    const RunMetrics& get(uint64_t seed, bool noise_loss) {
        const auto key = std::make_pair(seed, noise_loss);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        return cache_.emplace(key, run(seed, noise_loss)).first->second;
    }

private:
    RunMetrics run(uint64_t seed, bool noise_loss) {
        const auto started = std::chrono::steady_clock::now();
        auto cfg = phantom_experiment(seed, noise_loss, root_);
        auto paths = resolve_paths(cfg);
        paths.train_dir = paths.root / (noise_loss ? "train_noise_loss_on" : "train_noise_loss_off");
        if (!corpora_.count(seed)) {
            write_phantom_corpus(cfg, paths);
            patches_[seed] = prepare_patches(cfg, paths);
            corpora_.insert(seed);
        }
        const auto& patches = patches_.at(seed);
        std::cout << "  seed " << seed << " noise_loss=" << (noise_loss ? "on" : "off")
                  << ": training " << planned_steps(cfg.train, patches.noisy.count(), patches.clean.count())
                  << " steps" << std::endl;
        auto result = train_model(cfg, patches, paths.train_dir);
        auto denoiser = Denoiser::from_checkpoint(result.final_checkpoint, cfg.train.network);

        const auto rois = read_roi_config(paths.roi_config);
        std::vector<EvaluationInput> noisy_in, den_in, ideal_in;
        for (const auto& id : test_image_ids(paths)) {
            const auto noisy = load_image(paths.test_dir / (id + ".png"));
            const auto clean = load_image(paths.test_clean_dir / (id + ".png"));
            noisy_in.push_back({id, noisy, noisy});
            den_in.push_back({id, denoiser.denoise(noisy), noisy});
            ideal_in.push_back({id, clean, noisy});
        }
        RunMetrics m{evaluate_set(noisy_in, rois), evaluate_set(den_in, rois), evaluate_set(ideal_in, rois)};
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        auto show = [](const MetricMean& v) { return v.value ? fmt(*v.value) : std::string("undefined"); };
        std::cout << "    noisy    CNR " << show(m.noisy.cnr) << " EPI " << show(m.noisy.epi) << " ENL "
                  << show(m.noisy.enl) << "\n    denoised CNR " << show(m.denoised.cnr) << " EPI "
                  << show(m.denoised.epi) << " ENL " << show(m.denoised.enl)
                  << "\n    clean    CNR " << show(m.ideal.cnr) << " EPI " << show(m.ideal.epi)
                  << " ENL " << show(m.ideal.enl) << "  (" << fmt(secs, 4) << " s)" << std::endl;
        return m;
    }

    fs::path root_;
    std::map<std::pair<uint64_t, bool>, RunMetrics> cache_;
    std::set<uint64_t> corpora_;
    std::map<uint64_t, PatchSet> patches_;
};

const uint64_t kSeeds[] = {1, 2, 3};

double mean_or_nan(const MetricMean& m) { return m.value ? *m.value : std::nan(""); }

Outcome phantom_end_to_end(PhantomRuns& runs) {
    std::string detail;
    for (uint64_t seed : kSeeds) {
        const auto& m = runs.get(seed, true);
        const double enl_n = mean_or_nan(m.noisy.enl), enl_d = mean_or_nan(m.denoised.enl);
        const double epi_d = mean_or_nan(m.denoised.epi);
        const double cnr_n = mean_or_nan(m.noisy.cnr), cnr_d = mean_or_nan(m.denoised.cnr);
        const bool enl_ok = enl_d >= 5.0 * enl_n;
        const bool epi_ok = epi_d >= 0.6;
        const bool cnr_ok = cnr_d > cnr_n;
        detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) +
                  ": ENL " + fmt(enl_d) + " vs 5x" + fmt(enl_n) + (enl_ok ? " ok" : " no") +
                  ", EPI " + fmt(epi_d) + (epi_ok ? " ok" : " no") + ", CNR " + fmt(cnr_d) +
                  " vs " + fmt(cnr_n) + (cnr_ok ? " ok" : " no") + " (clean-image EPI " +
                  fmt(mean_or_nan(m.ideal.epi)) + ")";
        if (enl_ok && epi_ok && cnr_ok) return {true, detail};
    }
    return {false, detail};
}

Outcome ablation_direction(PhantomRuns& runs) {
    std::string detail;
    for (uint64_t seed : kSeeds) {
        const double on = mean_or_nan(runs.get(seed, true).denoised.cnr);
        const double off = mean_or_nan(runs.get(seed, false).denoised.cnr);
        const bool ok = on >= off;
        detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) +
                  ": CNR on " + fmt(on) + " vs off " + fmt(off);
        if (ok) return {true, detail};
    }
    return {false, detail};
}

// ---------------------------------------------------------------- ENL identity

Outcome enl_identity() {
    Checks c;
    std::string detail;
    RoiSpec s;
    s.signal_rois = {{0, 0, 1, 1}};
    s.background_roi = {1, 0, 399, 500};
    s.info_boundary_row = 1;
    for (double looks : {1.0, 4.0, 16.0}) {
        auto noisy = apply_speckle(Image(400, 500, 0.2), looks, 100 + static_cast<uint64_t>(looks));
        const double v = *enl(noisy, s).value;
        detail += (detail.empty() ? "" : ", ") + std::string("L=") + fmt(looks, 3) + " -> " + fmt(v);
        c.expect(std::abs(v - looks) <= 0.1 * looks, "L=" + fmt(looks, 3));
    }
    return c.outcome(detail);
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    const char* dir_env = std::getenv("DESPECKLE_ACCEPTANCE_DIR");
    PhantomRuns runs(dir_env ? fs::path(dir_env) : fs::path("acceptance_runs"));
    torch::set_num_threads(std::max(1, static_cast<int>(std::thread::hardware_concurrency())));

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"metric oracle suite", metric_oracles},
        {"metric invariances", metric_invariances},
        {"AdaIN checks", adain_checks},
        {"loss algebra", loss_algebra},
        {"patch-count law and noise purity", patch_laws},
        {"pipeline smoke (step, gradients, checkpoint resume)", pipeline_smoke},
        {"phantom end-to-end (ENL >= 5x noisy, EPI >= 0.6, CNR up)", [&] { return phantom_end_to_end(runs); }},
        {"ablation direction (CNR noise loss on >= off)", [&] { return ablation_direction(runs); }},
        {"phantom ENL identity (L = 1, 4, 16 within 10%)", enl_identity},
    };

    int failed = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(number)) continue;
        const auto started = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << number << "] " << criteria[i].first << ": "
                  << o.detail << " [" << fmt(secs, 4) << " s]" << std::endl;
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
