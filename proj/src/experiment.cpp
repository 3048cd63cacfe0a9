#include "stud/experiment.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "stud/error.hpp"
#include "stud/text.hpp"

namespace stud {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 14695981039346656037ULL;
    for (const char c : bytes) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::string fnv1a64_hex(std::string_view bytes) {
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buffer;
}

std::string checksum_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw EvalError("cannot read output file for checksum: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return "fnv1a:" + fnv1a64_hex(buffer.str());
}

namespace {

void write_manifest(const std::string& dir, const ExperimentConfig& config,
                    const RunOptions& options, bool complete,
                    const std::map<std::string, std::string>& files) {
    std::ofstream out(dir + "/manifest.txt", std::ios::binary);
    if (!out) {
        throw EvalError("cannot write manifest in " + dir);
    }
    out << "[run]\n";
    out << "status = " << (complete ? "complete" : "incomplete") << "\n";
    if (options.seed_override) {
        out << "seed_override = " << *options.seed_override << "\n";
    }
    out << "[config]\n";
    write_resolved_config(out, config);
    out << "[files]\n";
    for (const auto& [name, checksum] : files) {
        out << name << " = " << checksum << "\n";
    }
    if (!out) {
        throw EvalError("failed writing manifest in " + dir);
    }
}

std::string sanitize_path_token(const std::string& token) {
    std::string safe = token;
    for (char& c : safe) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '.' || c == '-';
        if (!ok) {
            c = '_';
        }
    }
    return safe;
}

void print_summary(const std::string& label, const MethodSummary& summary) {
    std::printf("  [%s] %s: fpr95=%.4f auroc=%.4f\n", label.c_str(),
                method_name(summary.method).c_str(), summary.fpr95,
                summary.auroc);
}

std::vector<MethodSummary> run_single(const ExperimentConfig& config,
                                      const RunOptions& options) {
    const std::string dir = config.output_dir;
    fs::create_directories(dir);
    write_manifest(dir, config, options, /*complete=*/false, {});

    const Stream train_stream =
        generate_stream(config.sim, config.train_videos, kTrainStreamSalt);
    const ModelParams initial =
        init_model(config.sim.feature_dim, config.d_enc, config.sim.num_classes,
                   config.nonlin, derive_seed(config.train.seed, kModelInitSalt));
    const TrainResult trained = train(train_stream, initial, config.train);

    std::map<std::string, std::string> files;
    const auto emit = [&](const std::string& name) {
        files[name] = checksum_file(dir + "/" + name);
    };

    write_train_log_csv(trained.log, dir + "/train_log.csv");
    emit("train_log.csv");
    save_params(trained.params, dir + "/params.txt");
    emit("params.txt");

    const Stream eval_stream =
        generate_stream(config.sim, config.eval.eval_videos, kEvalStreamSalt);

    std::vector<MethodSummary> summaries;
    for (const Method method : config.eval.methods) {
        const MetricsReport report =
            evaluate(trained.params, eval_stream, method,
                     config.train.objectness_threshold);
        const std::string tag = method_name(method);
        write_metrics_report(report, dir + "/metrics_" + tag + ".txt");
        emit("metrics_" + tag + ".txt");
        write_scores_csv(report, dir + "/scores_" + tag + ".csv");
        emit("scores_" + tag + ".csv");
        write_histogram_csv(report.score_hist,
                            dir + "/hist_scores_" + tag + ".csv");
        emit("hist_scores_" + tag + ".csv");
        write_histogram_csv(report.energy_hist,
                            dir + "/hist_energies_" + tag + ".csv");
        emit("hist_energies_" + tag + ".csv");
        summaries.push_back({method, report.fpr95, report.auroc});
        if (!options.quiet) {
            print_summary(dir, summaries.back());
        }
    }

    write_manifest(dir, config, options, /*complete=*/true, files);
    return summaries;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& base,
                         const RunOptions& options) {
    ExperimentConfig config = base;
    if (options.output_dir_override) {
        config.output_dir = *options.output_dir_override;
    }
    if (options.seed_override) {
        config.sim.seed = *options.seed_override;
        config.train.seed = *options.seed_override;
    }

    RunResult result;
    result.output_dir = config.output_dir;

    if (!config.sweep) {
        result.methods = run_single(config, options);
        return result;
    }

    result.swept = true;
    const SweepSpec sweep = *config.sweep;
    fs::create_directories(config.output_dir);
    write_manifest(config.output_dir, config, options, /*complete=*/false, {});

    std::map<std::string, std::string> files;
    std::ostringstream summary_csv;
    summary_csv << "axis_value,fpr95,auroc\n";
    for (const SweepValue& value : sweep.values) {
        ExperimentConfig point = apply_sweep_value(config, sweep.axis, value);
        const std::string subdir =
            sweep_axis_name(sweep.axis) + "_" + sanitize_path_token(value.token);
        point.output_dir = config.output_dir + "/" + subdir;
        if (!options.quiet) {
            std::printf("sweep %s = %s\n", sweep_axis_name(sweep.axis).c_str(),
                        value.token.c_str());
        }
        const std::vector<MethodSummary> summaries = run_single(point, options);
        // The summary row reports the first configured method.
        const MethodSummary& head = summaries.front();
        summary_csv << value.token << "," << format_double(head.fpr95) << ","
                    << format_double(head.auroc) << "\n";
        result.sweep_rows.emplace_back(value.token, head);
        files[subdir + "/manifest.txt"] =
            checksum_file(point.output_dir + "/manifest.txt");
    }

    {
        std::ofstream out(config.output_dir + "/sweep_summary.csv",
                          std::ios::binary);
        if (!out) {
            throw EvalError("cannot write sweep_summary.csv in " +
                            config.output_dir);
        }
        out << summary_csv.str();
    }
    files["sweep_summary.csv"] =
        checksum_file(config.output_dir + "/sweep_summary.csv");
    write_manifest(config.output_dir, config, options, /*complete=*/true,
                   files);
    return result;
}

}  // namespace stud
