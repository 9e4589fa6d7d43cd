#include "despeckle/cli.hpp"

#include "despeckle/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace despeckle {

namespace fs = std::filesystem;

int exit_code_for(ErrorCategory category) {
    switch (category) {
        case ErrorCategory::Config: return kExitConfig;
        case ErrorCategory::Io: return kExitIo;
        case ErrorCategory::Dimension:
        case ErrorCategory::Shape: return kExitShape;
        case ErrorCategory::Numeric: return kExitNumeric;
        case ErrorCategory::MissingInput: return kExitMissingInput;
    }
    return kExitFailure;
}

namespace {

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

void write_report(const fs::path& path, const std::string& provenance, const std::string& body) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out || !(out << "# provenance " << provenance << '\n' << body)) {
        throw IoError("cannot write " + path.string());
    }
}

fs::path output_root_from_env() {
    const char* v = std::getenv("DESPECKLE_OUTPUT_ROOT");
    return v ? fs::path(v) : fs::path();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Unsupervised speckle reduction for OCT B-scans"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("-c,--config", config_path, "INI config file");
    app.add_option("--set", overrides, "Override one config key, e.g. --set train.epochs=5")
        ->type_name("KEY=VALUE")
        ->take_all();

    auto* phantom = app.add_subcommand("phantom", "Generate a synthetic speckle phantom corpus");
    auto* prepare = app.add_subcommand("prepare", "Extract noisy, clean and noise patches");
    auto* train = app.add_subcommand("train", "Train the model on a prepared patch set");
    std::string resume;
    train->add_option("--resume", resume, "Checkpoint to continue from");

    auto* denoise = app.add_subcommand("denoise", "Denoise an image or a directory of images");
    std::string input, output, checkpoint, residuals;
    denoise->add_option("-i,--input", input, "Image file or directory (default: test images)");
    denoise->add_option("-o,--output", output, "Output directory (default: results/ours)");
    denoise->add_option("--checkpoint", checkpoint, "Checkpoint (default: final training checkpoint)");
    denoise->add_option("--residuals", residuals, "Also write noise estimates here");

    auto* evaluate = app.add_subcommand("evaluate", "Compute CNR/MSR/EPI/ENL for every method");
    auto* ablate = app.add_subcommand("ablate", "Train and compare the three noise-loss variants");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: config: " << one_line(e.what()) << '\n';
        return kExitConfig;
    }

    try {
        const auto config = config_path.empty() ? parse_config("", overrides)
                                                : load_config(config_path, overrides);
        const auto paths = resolve_paths(config, output_root_from_env());
        const std::string command = app.get_subcommands().front()->get_name();

        if (app.got_subcommand(phantom)) {
            const auto corpus = write_phantom_corpus(config, paths);
            write_run_record(config, command, paths.root / "phantom");
            out << "wrote " << corpus.train_noisy.size() << " noisy and " << corpus.train_clean.size()
                << " clean training phantoms, " << corpus.test_ids.size() << " test phantoms under "
                << (paths.root / "phantom").string() << '\n';
        } else if (app.got_subcommand(prepare)) {
            const auto set = prepare_patches(config, paths);
            write_run_record(config, command, paths.patchset_dir);
            for (const auto& w : set.warnings) err << "warning: " << w << '\n';
            out << "patches: noisy " << set.noisy.count() << ", clean " << set.clean.count()
                << ", noise " << set.noise.count() << " -> " << paths.patchset_dir.string() << '\n';
        } else if (app.got_subcommand(train)) {
            const auto set = load_patchset(paths.patchset_dir);
            write_run_record(config, command, paths.train_dir);
            const auto result = train_model(config, set, paths.train_dir, resume);
            out << "trained " << result.steps << " steps; checkpoint "
                << result.final_checkpoint.string() << '\n';
        } else if (app.got_subcommand(denoise)) {
            const fs::path ckpt = checkpoint.empty() ? paths.checkpoint : fs::path(checkpoint);
            const fs::path dest = output.empty() ? paths.results_dir / "ours" : fs::path(output);
            const auto denoiser = Denoiser::from_checkpoint(ckpt, config.train.network);
            const auto stems = denoise_path(denoiser, input.empty() ? paths.test_dir : fs::path(input),
                                            dest, residuals);
            write_run_record(config, command, dest);
            out << "denoised " << stems.size() << " images -> " << dest.string() << '\n';
        } else if (app.got_subcommand(evaluate)) {
            const auto results = evaluate_methods(config, paths);
            const auto text = format_evaluation(results);
            const auto dir = paths.root / "evaluation";
            write_report(dir / "report.tsv", provenance_json(config, command), text);
            write_run_record(config, command, dir);
            out << text;
        } else if (app.got_subcommand(ablate)) {
            const auto set = load_patchset(paths.patchset_dir);
            const auto dir = paths.root / "ablation";
            write_run_record(config, command, dir);
            const auto rows = run_ablation(config, paths, set);
            const auto text = format_ablation(rows);
            write_report(dir / "ablation.tsv", provenance_json(config, command), text);
            out << text;
        }
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << category_name(e.category()) << ": " << one_line(e.what()) << '\n';
        return exit_code_for(e.category());
    } catch (const c10::Error& e) {
        err << "error: internal: " << one_line(e.what_without_backtrace()) << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: internal: " << one_line(e.what()) << '\n';
        return kExitFailure;
    }
}

}  // namespace despeckle
