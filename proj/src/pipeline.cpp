#include "despeckle/pipeline.hpp"

#include "despeckle/baselines.hpp"
#include "despeckle/errors.hpp"
#include "despeckle/phantom.hpp"
#include "despeckle/seeding.hpp"

#include <json.hpp>
#include <opencv2/core/version.hpp>
#include <torch/version.h>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace despeckle {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path or_default(const fs::path& configured, const fs::path& fallback) {
    return configured.empty() ? fallback : configured;
}

std::string numbered(const char* prefix, int64_t i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03lld", prefix, static_cast<long long>(i));
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

}  // namespace

RunPaths resolve_paths(const ExperimentConfig& config, const fs::path& output_root) {
    RunPaths p;
    p.root = config.output_dir;
    if (!output_root.empty() && p.root.is_relative()) p.root = output_root / p.root;
    const auto phantom = p.root / "phantom";
    const auto& d = config.data;
    p.noisy_dir = or_default(d.noisy_dir, phantom / "train" / "noisy");
    p.clean_dir = or_default(d.clean_dir, phantom / "train" / "clean");
    p.boundary_manifest = or_default(d.boundary_manifest, phantom / "boundaries.csv");
    p.test_dir = or_default(d.test_dir, phantom / "test" / "noisy");
    p.test_clean_dir = phantom / "test" / "clean";
    p.roi_config = or_default(d.roi_config, phantom / "test_rois.txt");
    p.patchset_dir = or_default(d.patchset_dir, p.root / "patches");
    p.train_dir = p.root / "train";
    p.checkpoint = or_default(d.checkpoint, p.train_dir / "checkpoint_final.pt");
    p.results_dir = or_default(d.results_dir, p.root / "results");
    return p;
}

std::string provenance_json(const ExperimentConfig& config, const std::string& command) {
    json j;
    j["command"] = command;
    j["seed"] = config.seed;
    j["config"] = json::parse(config.to_json());
    j["versions"] = {{"despeckle", "1.0.0"},
                     {"libtorch", TORCH_VERSION},
                     {"opencv", CV_VERSION},
                     {"compiler", __VERSION__}};
    return j.dump();
}

void write_run_record(const ExperimentConfig& config, const std::string& command,
                      const fs::path& dir) {
    write_text(dir / "run.json", json::parse(provenance_json(config, command)).dump(2) + "\n");
}

PhantomCorpus write_phantom_corpus(const ExperimentConfig& config, const RunPaths& paths) {
    if (config.phantom_train_count < 2) {
        throw ConfigError("phantom.train_count must be >= 2 (one noisy and one clean phantom)");
    }
    if (config.phantom_test_count < 1) throw ConfigError("phantom.test_count must be >= 1");
    const double looks = config.phantom.looks;
    std::map<std::string, int64_t> boundaries;
    PhantomCorpus corpus;

    const int64_t noisy_count = config.phantom_train_count / 2;
    for (int64_t i = 0; i < config.phantom_train_count; ++i) {
        auto pc = config.phantom;
        pc.seed = derive_seed(config.seed, "phantom", static_cast<uint64_t>(i));
        const auto ph = generate_phantom(pc);
        const auto name = numbered("phantom", i) + ".png";
        if (i < noisy_count) {
            const auto noisy =
                apply_speckle(ph.clean, looks, derive_seed(config.seed, "speckle", static_cast<uint64_t>(i)));
            save_png16(noisy, paths.noisy_dir / name);
            boundaries[name] = ph.boundary_row;
            corpus.train_noisy.push_back(name);
        } else {
            save_png16(ph.clean, paths.clean_dir / name);
            corpus.train_clean.push_back(name);
        }
    }

    std::map<std::string, RoiSpec> rois;
    for (int64_t i = 0; i < config.phantom_test_count; ++i) {
        auto pc = config.phantom;
        pc.seed = derive_seed(config.seed, "phantom-test", static_cast<uint64_t>(i));
        const auto ph = generate_phantom(pc);
        const auto id = numbered("test", i);
        const auto noisy = apply_speckle(
            ph.clean, looks, derive_seed(config.seed, "speckle-test", static_cast<uint64_t>(i)));
        save_png16(noisy, paths.test_dir / (id + ".png"));
        save_png16(ph.clean, paths.test_clean_dir / (id + ".png"));
        boundaries[id + ".png"] = ph.boundary_row;
        rois[id] = phantom_rois(ph);
        corpus.test_ids.push_back(id);
    }
    write_boundary_manifest(boundaries, paths.boundary_manifest);
    write_text(paths.roi_config, format_roi_config(rois));
    return corpus;
}

PatchSet prepare_patches(const ExperimentConfig& config, const RunPaths& paths) {
    const auto boundaries = fs::exists(paths.boundary_manifest)
                                ? read_boundary_manifest(paths.boundary_manifest)
                                : std::map<std::string, int64_t>{};
    auto noisy = load_samples(paths.noisy_dir, Domain::Noisy, boundaries);
    auto clean = load_samples(paths.clean_dir, Domain::Clean);
    auto set = build_patchset(std::move(noisy), std::move(clean), config.prepare);
    save_patchset(set, paths.patchset_dir);
    return set;
}

TrainResult train_model(const ExperimentConfig& config, const PatchSet& patches,
                        const fs::path& out_dir, const fs::path& resume,
                        const StepCallback& on_step) {
    std::unique_ptr<Trainer> trainer;
    if (!resume.empty()) {
        trainer = Trainer::from_checkpoint(resume);
        if (!(trainer->config() == config.train)) {
            throw ConfigError("checkpoint " + resume.string() +
                              " was trained with a different training config");
        }
    } else {
        trainer = std::make_unique<Trainer>(config.train);
    }
    trainer->set_provenance(provenance_json(config, "train"));
    return train(*trainer, patches, out_dir, on_step);
}

std::vector<std::string> denoise_path(const Denoiser& denoiser, const fs::path& input,
                                      const fs::path& out_dir, const fs::path& residual_dir) {
    std::vector<fs::path> files;
    if (fs::is_directory(input)) {
        files = list_images(input);
    } else if (fs::exists(input)) {
        files.push_back(input);
    } else {
        throw IoError("no such input: " + input.string());
    }
    std::vector<std::string> stems;
    for (const auto& f : files) {
        const auto image = load_image(f);
        const auto out = denoiser.denoise(image);
        const auto stem = f.stem().string();
        save_png(out, out_dir / (stem + ".png"));
        if (!residual_dir.empty()) {
            save_signed_png(extract_noise_estimate(image, out), residual_dir / (stem + ".png"));
        }
        stems.push_back(stem);
    }
    return stems;
}

std::vector<std::string> test_image_ids(const RunPaths& paths) {
    std::vector<std::string> ids;
    for (const auto& f : list_images(paths.test_dir)) ids.push_back(f.stem().string());
    if (ids.empty()) throw MissingInputError("no test images in " + paths.test_dir.string());
    return ids;
}

namespace {

std::map<std::string, Image> load_test_images(const RunPaths& paths) {
    // an absent test dir means an earlier stage has not run yet
    if (!fs::is_directory(paths.test_dir)) {
        throw MissingInputError("no test images in " + paths.test_dir.string() +
                                " (run `despeckle phantom` or supply the test set)");
    }
    std::map<std::string, Image> out;
    for (const auto& f : list_images(paths.test_dir)) out[f.stem().string()] = load_image(f);
    if (out.empty()) throw MissingInputError("no test images in " + paths.test_dir.string());
    return out;
}

MetricTable evaluate_images(const std::map<std::string, Image>& noisy,
                            const std::map<std::string, Image>& denoised,
                            const std::map<std::string, RoiSpec>& rois) {
    std::vector<EvaluationInput> inputs;
    for (const auto& [id, image] : noisy) inputs.push_back({id, denoised.at(id), image});
    return evaluate_set(inputs, rois);
}

}  // namespace

std::vector<MethodResult> evaluate_methods(const ExperimentConfig& config, const RunPaths& paths) {
    const auto noisy = load_test_images(paths);
    std::vector<std::string> ids;
    for (const auto& [id, _] : noisy) ids.push_back(id);

    std::vector<std::string> methods;
    if (fs::is_directory(paths.results_dir)) {
        for (const auto& e : fs::directory_iterator(paths.results_dir)) {
            if (e.is_directory()) methods.push_back(e.path().filename().string());
        }
    }
    std::sort(methods.begin(), methods.end());
    if (methods.empty()) {
        std::string expected;
        for (const auto& id : ids) {
            expected += "\n  " + (paths.results_dir / "<method>" / (id + ".png")).string();
        }
        throw MissingInputError("no denoised results found; expected inputs:" + expected +
                                "\n(run `despeckle denoise` to produce results/ours)");
    }
    if (!fs::exists(paths.roi_config)) {
        throw MissingInputError("ROI config not found: " + paths.roi_config.string());
    }
    const auto rois = read_roi_config(paths.roi_config);

    ResultRegistry registry;
    ResultSet identity{"noisy", noisy};
    ResultSet median{"median", {}}, bilateral{"bilateral", {}};
    for (const auto& [id, image] : noisy) {
        median.images[id] = median_filter(image, config.baselines.median_window);
        bilateral.images[id] = bilateral_filter(image, config.baselines.bilateral_sigma_spatial,
                                                config.baselines.bilateral_sigma_range);
    }
    registry.add(std::move(identity));
    registry.add(std::move(median));
    registry.add(std::move(bilateral));
    for (const auto& m : methods) ingest_external_result(registry, m, paths.results_dir / m, ids);

    std::vector<MethodResult> out;
    for (const auto& set : registry.sets()) {
        out.push_back({set.method, evaluate_images(noisy, set.images, rois)});
    }
    return out;
}

namespace {

std::string mean_text(const MetricMean& m) {
    return m.value ? format_metric(MetricValue::defined(*m.value)) : std::string("undefined");
}

}  // namespace

std::string format_evaluation(const std::vector<MethodResult>& results) {
    std::ostringstream os;
    os << "method\tCNR\tMSR\tEPI\tENL\n";
    for (const auto& r : results) {
        os << r.method << '\t' << mean_text(r.table.cnr) << '\t' << mean_text(r.table.msr) << '\t'
           << mean_text(r.table.epi) << '\t' << mean_text(r.table.enl) << '\n';
    }
    for (const auto& r : results) {
        os << "\n# " << r.method << '\n' << format_metric_table(r.table);
    }
    return os.str();
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const RunPaths& paths,
                                      const PatchSet& patches) {
    struct Variant {
        const char* name;
        bool noise_loss;
        NoiseVariant variant;
    };
    const Variant variants[] = {
        {"noise_loss_on", true, NoiseVariant::PatchAdversarial},
        {"noise_loss_off", false, NoiseVariant::PatchAdversarial},
        {"gaussian_kl", true, NoiseVariant::GaussianKl},
    };
    if (!fs::exists(paths.roi_config)) {
        throw MissingInputError("ROI config not found: " + paths.roi_config.string());
    }
    const auto rois = read_roi_config(paths.roi_config);
    const auto noisy = load_test_images(paths);

    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        auto cfg = config;
        cfg.train.noise_loss = v.noise_loss;
        cfg.train.variant = v.variant;
        cfg.train.validate();
        const auto dir = paths.root / "ablation" / v.name;
        const auto result = train_model(cfg, patches, dir);
        const auto denoiser = Denoiser::from_checkpoint(result.final_checkpoint);
        std::map<std::string, Image> denoised;
        for (const auto& [id, image] : noisy) {
            denoised[id] = denoiser.denoise(image);
            save_png(denoised[id], dir / "denoised" / (id + ".png"));
        }
        rows.push_back({v.name, evaluate_images(noisy, denoised, rois)});
    }
    return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "variant\tCNR\tEPI\tMSR\tENL\n";
    for (const auto& r : rows) {
        os << r.variant << '\t' << mean_text(r.table.cnr) << '\t' << mean_text(r.table.epi) << '\t'
           << mean_text(r.table.msr) << '\t' << mean_text(r.table.enl) << '\n';
    }
    return os.str();
}

}  // namespace despeckle
