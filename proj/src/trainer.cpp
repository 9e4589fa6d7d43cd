#include "despeckle/trainer.hpp"

#include "despeckle/config.hpp"
#include "despeckle/errors.hpp"
#include "despeckle/seeding.hpp"
#include "despeckle/tensor_image.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace despeckle {

namespace fs = std::filesystem;

namespace {

std::string shape_text(const torch::Tensor& t) {
    std::ostringstream os;
    os << t.sizes();
    return os.str();
}

void set_requires_grad(const std::vector<torch::Tensor>& params, bool on) {
    for (auto p : params) p.requires_grad_(on);
}

torch::optim::AdamOptions adam_options(const TrainConfig& c) {
    return torch::optim::AdamOptions(c.lr).betas({c.beta1, c.beta2});
}

}  // namespace

TranslationBundle build_translation_bundle(const torch::Tensor& x, const torch::Tensor& y,
                                           const torch::Tensor& n, ModelSet& model,
                                           std::optional<at::Generator> generator) {
    require_single_channel(x, "bundle input x");
    require_single_channel(y, "bundle input y");
    if (x.sizes() != y.sizes()) {
        throw ShapeError("bundle: noisy batch " + shape_text(x) + " and clean batch " +
                         shape_text(y) + " differ");
    }
    if (n.defined()) {
        require_single_channel(n, "bundle input n");
        if (n.sizes() != x.sizes()) {
            throw ShapeError("bundle: noise batch " + shape_text(n) + " does not match " +
                             shape_text(x));
        }
    }
    TranslationBundle b;
    b.x = x;
    b.y = y;
    b.n = n;

    auto content_x = model.content_encoder(x);
    auto content_y = model.content_encoder(y);
    b.noise_x = model.noise_encoder(x, generator);

    b.x_clean = model.clean_generator(content_x);
    b.y_noisy = model.noisy_generator(content_y.content, b.noise_x.code);
    b.x_recon = model.noisy_generator(content_x.content, b.noise_x.code);
    b.y_recon = model.clean_generator(content_y);

    auto content_x_clean = model.content_encoder(b.x_clean);
    auto content_y_noisy = model.content_encoder(b.y_noisy);
    b.noise_y_noisy = model.noise_encoder(b.y_noisy, generator);
    b.x_cycle = model.noisy_generator(content_x_clean.content, b.noise_y_noisy.code);
    b.y_cycle = model.clean_generator(content_y_noisy);
    return b;
}

Trainer::Trainer(TrainConfig config)
    : config_(std::move(config)),
      sampling_rng_(at::make_generator<at::CPUGeneratorImpl>(
          derive_seed(config_.seed, "reparameterization"))),
      shuffle_rng_(derive_seed(config_.seed, "shuffle")) {
    config_.validate();
    model_ = ModelSet::create(config_, derive_seed(config_.seed, "init"));
    generator_opt_ = std::make_unique<torch::optim::Adam>(model_.generator_parameters(),
                                                          adam_options(config_));
    discriminator_opt_ = std::make_unique<torch::optim::Adam>(model_.discriminator_parameters(),
                                                              adam_options(config_));
}

LossReport Trainer::step(const TripleBatch& batch) {
    model_.train(true);
    const bool noise_d = config_.uses_noise_discriminator();
    if (noise_d && (!batch.noise.defined() || batch.noise.numel() == 0)) {
        throw ConfigError("the noise adversarial loss needs a batch of noise patches");
    }
    auto bundle = build_translation_bundle(batch.noisy, batch.clean,
                                           noise_d ? batch.noise : torch::Tensor(), model_,
                                           sampling_rng_);

    // discriminators on detached fakes
    const auto d_params = model_.discriminator_parameters();
    set_requires_grad(d_params, true);
    DiscriminatorTerms d;
    auto domain = domain_discriminator_loss(model_.clean_discriminator,
                                            model_.noisy_discriminator, bundle);
    d.clean_domain = domain.first;
    d.noisy_domain = domain.second;
    if (noise_d) {
        d.noise = noise_discriminator_loss(model_.noise_discriminator, bundle,
                                           config_.center_residuals)
                      .sum();
    }
    require_finite(d.clean_domain, "adv_d_clean");
    require_finite(d.noisy_domain, "adv_d_noisy");
    require_finite(d.noise, "noise_d");
    discriminator_opt_->zero_grad();
    discriminator_total(d).backward();
    discriminator_opt_->step();

    // encoders and generators against the updated discriminators
    set_requires_grad(d_params, false);
    GeneratorTerms g;
    g.adversarial =
        domain_generator_loss(model_.clean_discriminator, model_.noisy_discriminator, bundle);
    g.cycle = cycle_loss(bundle);
    g.recon = reconstruction_loss(bundle);
    if (noise_d) {
        g.noise = noise_generator_loss(model_.noise_discriminator, bundle, config_.center_residuals);
    } else if (config_.uses_kl_head()) {
        g.noise = kl_noise_loss(bundle.noise_x.mean, bundle.noise_x.logvar);
    }
    DiscriminatorTerms d_values{d.clean_domain.detach(), d.noisy_domain.detach(),
                                d.noise.defined() ? d.noise.detach() : torch::Tensor()};
    auto objective =
        total_objective(g, d_values, config_.weights, config_.noise_loss, config_.variant);
    generator_opt_->zero_grad();
    objective.total_g.backward();
    generator_opt_->step();
    set_requires_grad(d_params, true);

    ++global_step_;
    return objective.report;
}

void Trainer::save_checkpoint(const fs::path& path) const {
    torch::serialize::OutputArchive archive;
    archive.write("format", c10::IValue(std::string(kCheckpointFormat)));
    archive.write("version", c10::IValue(kCheckpointVersion));
    archive.write("train_config", c10::IValue(train_config_to_json(config_)));
    archive.write("provenance", c10::IValue(provenance_));
    archive.write("epoch", c10::IValue(epoch_));
    archive.write("global_step", c10::IValue(global_step_));
    {
        std::ostringstream os;
        os << shuffle_rng_;
        archive.write("shuffle_rng", c10::IValue(os.str()));
    }
    {
        std::lock_guard<std::mutex> lock(sampling_rng_.mutex());
        archive.write("sampling_rng", sampling_rng_.get_state());
    }
    for (const auto& [name, module] : model_.named_modules()) {
        torch::serialize::OutputArchive sub;
        module->save(sub);
        archive.write("model_" + name, sub);
    }
    torch::serialize::OutputArchive g_sub, d_sub;
    generator_opt_->save(g_sub);
    discriminator_opt_->save(d_sub);
    archive.write("optim_generator", g_sub);
    archive.write("optim_discriminator", d_sub);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    try {
        archive.save_to(path.string());
    } catch (const c10::Error& e) {
        throw IoError("cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
    }
}

namespace {

torch::serialize::InputArchive open_checkpoint(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("checkpoint not found: " + path.string());
    torch::serialize::InputArchive archive;
    try {
        archive.load_from(path.string());
    } catch (const c10::Error& e) {
        throw IoError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
    }
    c10::IValue format, version;
    if (!archive.try_read("format", format) || !format.isString() ||
        format.toStringRef() != kCheckpointFormat) {
        throw IoError(path.string() + " is not a checkpoint of this project");
    }
    archive.read("version", version);
    if (version.toInt() != kCheckpointVersion) {
        throw IoError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(version.toInt()));
    }
    return archive;
}

std::string read_string(torch::serialize::InputArchive& archive, const std::string& key) {
    c10::IValue v;
    archive.read(key, v);
    return v.toStringRef();
}

}  // namespace

TrainConfig read_checkpoint_config(const fs::path& path) {
    auto archive = open_checkpoint(path);
    return train_config_from_json(read_string(archive, "train_config"));
}

std::unique_ptr<Trainer> Trainer::from_checkpoint(const fs::path& path) {
    auto archive = open_checkpoint(path);
    auto trainer = std::make_unique<Trainer>(train_config_from_json(read_string(archive, "train_config")));
    trainer->provenance_ = read_string(archive, "provenance");
    c10::IValue v;
    archive.read("epoch", v);
    trainer->epoch_ = v.toInt();
    archive.read("global_step", v);
    trainer->global_step_ = v.toInt();
    {
        std::istringstream is(read_string(archive, "shuffle_rng"));
        is >> trainer->shuffle_rng_;
    }
    {
        torch::Tensor state;
        archive.read("sampling_rng", state);
        std::lock_guard<std::mutex> lock(trainer->sampling_rng_.mutex());
        trainer->sampling_rng_.set_state(state);
    }
    try {
        for (const auto& [name, module] : trainer->model_.named_modules()) {
            torch::serialize::InputArchive sub;
            archive.read("model_" + name, sub);
            module->load(sub);
        }
        torch::serialize::InputArchive g_sub, d_sub;
        archive.read("optim_generator", g_sub);
        archive.read("optim_discriminator", d_sub);
        trainer->generator_opt_->load(g_sub);
        trainer->discriminator_opt_->load(d_sub);
    } catch (const c10::Error& e) {
        throw ConfigError("checkpoint " + path.string() +
                          " does not match its network config: " + e.what_without_backtrace());
    }
    return trainer;
}

int64_t planned_steps(const TrainConfig& config, int64_t noisy_count, int64_t clean_count) {
    return config.epochs * (std::min(noisy_count, clean_count) / config.batch_size);
}

torch::Tensor population_tensor(const PatchPopulation& pop, int64_t patch_size) {
    if (pop.count() == 0) return torch::empty({0, 1, patch_size, patch_size});
    return torch::from_blob(const_cast<float*>(pop.data.data()),
                            {pop.count(), 1, patch_size, patch_size}, torch::kFloat32)
        .clone();
}

namespace {

std::vector<int64_t> permutation(int64_t n, std::mt19937_64& rng) {
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

torch::Tensor gather(const torch::Tensor& all, const std::vector<int64_t>& perm, int64_t start,
                     int64_t count) {
    std::vector<int64_t> picked(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
        picked[static_cast<size_t>(i)] =
            perm[static_cast<size_t>((start + i) % static_cast<int64_t>(perm.size()))];
    }
    return all.index_select(0, torch::tensor(picked, torch::kLong));
}

void write_sample_grid(Trainer& trainer, const torch::Tensor& noisy, const torch::Tensor& clean,
                       const fs::path& path) {
    torch::NoGradGuard guard;
    auto x = noisy.narrow(0, 0, 1);
    auto y = clean.narrow(0, 0, 1);
    auto b = build_translation_bundle(x, y, torch::Tensor(), trainer.model());
    save_png(hconcat({tensor_to_image(b.x), tensor_to_image(b.x_clean), tensor_to_image(b.x_recon),
                      tensor_to_image(b.y), tensor_to_image(b.y_noisy)}),
             path);
}

std::string epoch_tag(int64_t epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld", static_cast<long long>(epoch));
    return buf;
}

}  // namespace

TrainResult train(Trainer& trainer, const PatchSet& patches, const fs::path& out_dir,
                  const StepCallback& on_step) {
    const auto& cfg = trainer.config();
    if (patches.noisy.count() == 0 || patches.clean.count() == 0) {
        throw ConfigError("training needs nonempty noisy and clean patch populations");
    }
    if (cfg.uses_noise_discriminator() && patches.noise.count() == 0) {
        throw ConfigError("the noise adversarial loss needs noise patches, but the patch set "
                          "has none (set train.noise_loss=off or harvest more background)");
    }
    const int64_t per_epoch = std::min(patches.noisy.count(), patches.clean.count()) / cfg.batch_size;
    if (per_epoch == 0) {
        throw ConfigError("populations are smaller than one batch of " +
                          std::to_string(cfg.batch_size));
    }

    const auto noisy = population_tensor(patches.noisy, patches.patch_size);
    const auto clean = population_tensor(patches.clean, patches.patch_size);
    const auto noise = population_tensor(patches.noise, patches.patch_size);

    std::ofstream log;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const auto log_path = out_dir / "train_log.tsv";
        const bool fresh = !fs::exists(log_path) || trainer.global_step() == 0;
        log.open(log_path, fresh ? std::ios::trunc : std::ios::app);
        if (!log) throw IoError("cannot write " + log_path.string());
        log << std::setprecision(9);
        if (fresh) {
            log << "step\tepoch";
            for (const char* t : {"adv_g", "cycle", "recon"}) log << '\t' << t;
            if (cfg.uses_noise_discriminator()) log << "\tnoise_g";
            if (cfg.uses_kl_head()) log << "\tkl";
            log << "\tadv_d_clean\tadv_d_noisy";
            if (cfg.uses_noise_discriminator()) log << "\tnoise_d";
            log << "\ttotal_G\ttotal_D\n";
        }
    }

    TrainResult result;
    while (trainer.epoch() < cfg.epochs) {
        auto& rng = trainer.shuffle_rng();
        const auto noisy_perm = permutation(noisy.size(0), rng);
        const auto clean_perm = permutation(clean.size(0), rng);
        const auto noise_perm = permutation(noise.size(0), rng);
        for (int64_t i = 0; i < per_epoch; ++i) {
            TripleBatch batch;
            batch.noisy = gather(noisy, noisy_perm, i * cfg.batch_size, cfg.batch_size);
            batch.clean = gather(clean, clean_perm, i * cfg.batch_size, cfg.batch_size);
            if (!noise_perm.empty()) {
                batch.noise = gather(noise, noise_perm, i * cfg.batch_size, cfg.batch_size);
            }
            result.last_report = trainer.step(batch);
            ++result.steps;
            if (log.is_open()) {
                log << trainer.global_step() << '\t' << trainer.epoch();
                for (const auto& t : result.last_report.terms) log << '\t' << t.value;
                log << '\t' << result.last_report.total_g << '\t' << result.last_report.total_d
                    << '\n';
            }
            if (on_step) on_step(trainer, result.last_report);
        }
        trainer.finish_epoch();
        if (!out_dir.empty() && cfg.checkpoint_every > 0 &&
            trainer.epoch() % cfg.checkpoint_every == 0 && trainer.epoch() < cfg.epochs) {
            const auto tag = epoch_tag(trainer.epoch());
            trainer.save_checkpoint(out_dir / ("checkpoint_epoch_" + tag + ".pt"));
            write_sample_grid(trainer, noisy, clean, out_dir / ("samples_epoch_" + tag + ".png"));
        }
    }
    if (!out_dir.empty()) {
        log.flush();
        result.final_checkpoint = out_dir / "checkpoint_final.pt";
        trainer.save_checkpoint(result.final_checkpoint);
        write_sample_grid(trainer, noisy, clean, out_dir / "samples_final.png");
    }
    return result;
}

}  // namespace despeckle
