#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stud/metrics.hpp"
#include "stud/sim.hpp"
#include "stud/trainer.hpp"

// Experiment configuration: a flat sectioned key = value text format.
//   [section]
//   key = value            # scalar: integer, real, or bare token
//   list = [a, b, c]       # brackets, comma-separated
// '#' starts a comment. Every key has a default (the benchmark settings),
// so an empty file is a valid config. See the config reference in the
// README for the full key list.

namespace stud {

struct ConfigEntry {
    bool is_list = false;
    std::string scalar;
    std::vector<std::string> items;
    std::size_t line = 0;
    bool consumed = false;
};

class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_text(std::string_view text, std::string name);

    const std::string& name() const { return name_; }
    bool has(const std::string& key) const;

    // Typed getters; each marks the entry consumed. Missing keys return
    // the fallback. Type errors carry file:line.
    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key, double fallback);
    long long get_int(const std::string& key, long long fallback);
    std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback);
    std::vector<std::string> get_list(const std::string& key,
                                      const std::vector<std::string>& fallback);
    std::vector<double> get_double_list(const std::string& key);

    std::string where(const std::string& key) const;
    std::vector<std::string> unconsumed_keys() const;

private:
    std::map<std::string, ConfigEntry> entries_;
    std::string name_;
};

enum class SweepAxis { kT, kR, kBeta, kPercentile };

std::string sweep_axis_name(SweepAxis axis);
SweepAxis parse_sweep_axis(std::string_view token);

struct SweepValue {
    std::string token;       // as written in the config; reused in reports
    std::size_t t_value = 0;
    long r_value = 0;
    double beta_value = 0.0;
    double percentile_lo = 0.0;
    double percentile_hi = 0.0;
};

struct SweepSpec {
    SweepAxis axis = SweepAxis::kBeta;
    std::vector<SweepValue> values;
};

struct EvalSettings {
    std::size_t eval_videos = 8;
    std::vector<Method> methods = {Method::kStud, Method::kMsp, Method::kEnergy};
};

struct ExperimentConfig {
    SimSpec sim;
    std::size_t train_videos = 40;
    std::size_t d_enc = 8;
    Nonlinearity nonlin = Nonlinearity::kTanh;
    TrainConfig train;
    EvalSettings eval;
    std::string output_dir = "out";
    std::optional<SweepSpec> sweep;
};

// Defaults for every key, cluster-mean scheme expansion, explicit
// overrides, then invariant validation. Throws ConfigError.
ExperimentConfig resolve_config(ConfigFile& file);

// The benchmark configuration (an empty config file).
ExperimentConfig default_config();

ExperimentConfig load_config(const std::string& path);

// Applies one sweep value to a copy of the base run configuration.
ExperimentConfig apply_sweep_value(const ExperimentConfig& base,
                                   SweepAxis axis, const SweepValue& value);

// Flattened `section.key = value` dump of a resolved config (manifest
// section payload).
void write_resolved_config(std::ostream& out, const ExperimentConfig& config);

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;

    bool ok() const { return errors.empty(); }
};

// Full invariant check without running anything.
ValidationReport validate_config_file(const std::string& path);

std::string format_range(long range);  // "inf" at or above kInfiniteRange
long parse_range(std::string_view token, const std::string& what);

}  // namespace stud
