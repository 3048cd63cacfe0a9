#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stud/config.hpp"

// End-to-end experiment runner: train on a seeded stream, evaluate every
// requested method on a held-out stream, emit plot-ready reports, and
// record everything in a checksummed manifest. Sweeps fan out into one
// subdirectory per axis value plus a summary CSV.

namespace stud {

inline constexpr std::uint64_t kModelInitSalt = 0x494e4954;  // "INIT"

std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

// Checksum of a file's raw bytes, formatted "fnv1a:<16 hex digits>".
std::string checksum_file(const std::string& path);

struct RunOptions {
    std::optional<std::string> output_dir_override;
    std::optional<std::uint64_t> seed_override;  // sets sim.seed and train.seed
    bool quiet = false;
};

struct MethodSummary {
    Method method = Method::kStud;
    double fpr95 = 0.0;
    double auroc = 0.0;
};

struct RunResult {
    std::string output_dir;
    bool swept = false;
    std::vector<MethodSummary> methods;  // single run: one entry per method
    std::vector<std::pair<std::string, MethodSummary>> sweep_rows;
};

// Writes train_log.csv, params.txt, per-method metrics/scores/histogram
// files, and manifest.txt under config.output_dir. The manifest starts
// incomplete and flips to complete only after every file is written and
// checksummed, so an interrupted run is detectable.
RunResult run_experiment(const ExperimentConfig& config,
                         const RunOptions& options = {});

}  // namespace stud
