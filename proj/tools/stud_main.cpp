#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "stud/config.hpp"
#include "stud/error.hpp"
#include "stud/experiment.hpp"

namespace {

int do_run(const std::string& config_path, const stud::RunOptions& options) {
    stud::ExperimentConfig config = stud::load_config(config_path);
    const stud::RunResult result = stud::run_experiment(config, options);
    if (!options.quiet) {
        std::printf("outputs written to %s\n", result.output_dir.c_str());
    }
    return 0;
}

int do_validate(const std::string& config_path) {
    const stud::ValidationReport report =
        stud::validate_config_file(config_path);
    for (const auto& error : report.errors) {
        std::fprintf(stderr, "error: %s\n", error.c_str());
    }
    for (const auto& warning : report.warnings) {
        std::fprintf(stderr, "warning: %s\n", warning.c_str());
    }
    if (report.ok()) {
        std::printf("%s: ok (%zu warning%s)\n", config_path.c_str(),
                    report.warnings.size(),
                    report.warnings.size() == 1 ? "" : "s");
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stud: unknown-distillation OOD experiments"};
    app.require_subcommand(1);

    std::string run_config;
    stud::RunOptions options;
    std::string output_dir;
    std::uint64_t seed = 0;

    CLI::App* run = app.add_subcommand("run", "train, evaluate, write reports");
    run->add_option("config", run_config, "experiment config file")->required();
    CLI::Option* dir_opt =
        run->add_option("--output-dir", output_dir, "override output.dir");
    CLI::Option* seed_opt = run->add_option(
        "--seed", seed, "override sim and train seeds (recorded in manifest)");
    run->add_flag("--quiet", options.quiet, "suppress progress output");

    std::string validate_config;
    CLI::App* validate =
        app.add_subcommand("validate", "check a config without running");
    validate->add_option("config", validate_config, "experiment config file")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (*dir_opt) {
                options.output_dir_override = output_dir;
            }
            if (*seed_opt) {
                options.seed_override = seed;
            }
            return do_run(run_config, options);
        }
        return do_validate(validate_config);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
