#include "stud/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "stud/error.hpp"
#include "stud/text.hpp"

namespace stud {

namespace {

bool valid_key_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_';
}

bool valid_key(std::string_view key) {
    if (key.empty()) {
        return false;
    }
    for (char c : key) {
        if (!valid_key_char(c)) {
            return false;
        }
    }
    return true;
}

std::string location(const std::string& name, std::size_t line) {
    return name + ":" + std::to_string(line);
}

std::vector<std::string> split_list(std::string_view inner,
                                    const std::string& loc) {
    std::vector<std::string> items;
    if (trim(inner).empty()) {
        return items;
    }
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = inner.find(',', start);
        const std::string_view raw = comma == std::string_view::npos
                                         ? inner.substr(start)
                                         : inner.substr(start, comma - start);
        const std::string item{trim(raw)};
        if (item.empty()) {
            throw ConfigError(loc + ": empty list element");
        }
        items.push_back(item);
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return items;
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str(), path);
}

ConfigFile ConfigFile::parse_text(std::string_view text, std::string name) {
    ConfigFile file;
    file.name_ = std::move(name);

    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = eol == std::string_view::npos
                                    ? text.substr(pos)
                                    : text.substr(pos, eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        if (const std::size_t hash = line.find('#');
            hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const std::string loc = location(file.name_, line_no);

        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(loc + ": unterminated section header");
            }
            const std::string_view inner = trim(line.substr(1, line.size() - 2));
            if (!valid_key(inner)) {
                throw ConfigError(loc + ": bad section name '" +
                                  std::string(inner) + "'");
            }
            section = std::string(inner);
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(loc + ": expected 'key = value' or '[section]'");
        }
        const std::string_view key = trim(line.substr(0, eq));
        if (!valid_key(key)) {
            throw ConfigError(loc + ": bad key '" + std::string(key) + "'");
        }
        if (section.empty()) {
            throw ConfigError(loc + ": key '" + std::string(key) +
                              "' appears before any [section] header");
        }
        const std::string_view value = trim(line.substr(eq + 1));

        ConfigEntry entry;
        entry.line = line_no;
        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']') {
                throw ConfigError(loc + ": unterminated list value");
            }
            entry.is_list = true;
            entry.items = split_list(value.substr(1, value.size() - 2), loc);
        } else {
            if (value.empty()) {
                throw ConfigError(loc + ": empty value for key '" +
                                  std::string(key) + "'");
            }
            entry.scalar = std::string(value);
        }

        const std::string full = section + "." + std::string(key);
        if (!file.entries_.emplace(full, std::move(entry)).second) {
            throw ConfigError(loc + ": duplicate key '" + full + "'");
        }
    }
    return file;
}

bool ConfigFile::has(const std::string& key) const {
    return entries_.count(key) != 0;
}

std::string ConfigFile::where(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return name_;
    }
    return location(name_, it->second.line) + ": " + key;
}

std::string ConfigFile::get_string(const std::string& key,
                                   const std::string& fallback) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return fallback;
    }
    it->second.consumed = true;
    if (it->second.is_list) {
        throw ConfigError(where(key) + ": expected a scalar, got a list");
    }
    return it->second.scalar;
}

double ConfigFile::get_double(const std::string& key, double fallback) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return fallback;
    }
    it->second.consumed = true;
    if (it->second.is_list) {
        throw ConfigError(where(key) + ": expected a number, got a list");
    }
    return parse_double(it->second.scalar, where(key));
}

long long ConfigFile::get_int(const std::string& key, long long fallback) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return fallback;
    }
    it->second.consumed = true;
    if (it->second.is_list) {
        throw ConfigError(where(key) + ": expected an integer, got a list");
    }
    return parse_int(it->second.scalar, where(key));
}

std::uint64_t ConfigFile::get_uint64(const std::string& key,
                                     std::uint64_t fallback) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return fallback;
    }
    it->second.consumed = true;
    if (it->second.is_list) {
        throw ConfigError(where(key) + ": expected an integer, got a list");
    }
    return parse_uint64(it->second.scalar, where(key));
}

std::vector<std::string> ConfigFile::get_list(
    const std::string& key, const std::vector<std::string>& fallback) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return fallback;
    }
    it->second.consumed = true;
    if (!it->second.is_list) {
        throw ConfigError(where(key) + ": expected a [list]");
    }
    return it->second.items;
}

std::vector<double> ConfigFile::get_double_list(const std::string& key) {
    const auto tokens = get_list(key, {});
    std::vector<double> values;
    values.reserve(tokens.size());
    for (const auto& token : tokens) {
        values.push_back(parse_double(token, where(key)));
    }
    return values;
}

std::vector<std::string> ConfigFile::unconsumed_keys() const {
    std::vector<std::string> keys;
    for (const auto& [key, entry] : entries_) {
        if (!entry.consumed) {
            keys.push_back(location(name_, entry.line) + ": " + key);
        }
    }
    return keys;
}

std::string sweep_axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::kT: return "T";
        case SweepAxis::kR: return "R";
        case SweepAxis::kBeta: return "beta";
        case SweepAxis::kPercentile: return "percentile";
    }
    throw ConfigError("unknown sweep axis");
}

SweepAxis parse_sweep_axis(std::string_view token) {
    if (token == "T") return SweepAxis::kT;
    if (token == "R") return SweepAxis::kR;
    if (token == "beta") return SweepAxis::kBeta;
    if (token == "percentile") return SweepAxis::kPercentile;
    throw ConfigError("unknown sweep axis '" + std::string(token) +
                      "' (expected T, R, beta, or percentile)");
}

std::string format_range(long range) {
    if (range >= kInfiniteRange) {
        return "inf";
    }
    return std::to_string(range);
}

long parse_range(std::string_view token, const std::string& what) {
    if (token == "inf") {
        return kInfiniteRange;
    }
    const long long value = parse_int(token, what);
    if (value < 1) {
        throw ConfigError(what + ": range must be >= 1 or 'inf'");
    }
    if (value > kInfiniteRange) {
        return kInfiniteRange;
    }
    return static_cast<long>(value);
}

namespace {

std::size_t get_count(ConfigFile& file, const std::string& key,
                      std::size_t fallback, long long min_value) {
    const long long value =
        file.get_int(key, static_cast<long long>(fallback));
    if (value < min_value) {
        throw ConfigError(file.where(key) + ": must be >= " +
                          std::to_string(min_value) + " (got " +
                          std::to_string(value) + ")");
    }
    return static_cast<std::size_t>(value);
}

SweepValue parse_sweep_value(SweepAxis axis, const std::string& token,
                             const std::string& loc) {
    SweepValue value;
    value.token = token;
    switch (axis) {
        case SweepAxis::kT: {
            const long long t = parse_int(token, loc);
            if (t < 1) {
                throw ConfigError(loc + ": T values must be >= 1");
            }
            value.t_value = static_cast<std::size_t>(t);
            break;
        }
        case SweepAxis::kR:
            value.r_value = parse_range(token, loc);
            break;
        case SweepAxis::kBeta:
            value.beta_value = parse_double(token, loc);
            if (!(value.beta_value >= 0.0)) {
                throw ConfigError(loc + ": beta values must be >= 0");
            }
            break;
        case SweepAxis::kPercentile: {
            const std::size_t dash = token.find('-');
            if (dash == std::string::npos || dash + 1 >= token.size()) {
                throw ConfigError(loc + ": percentile values look like lo-hi, "
                                  "e.g. 40-60 (got '" + token + "')");
            }
            value.percentile_lo = parse_double(token.substr(0, dash), loc);
            value.percentile_hi = parse_double(token.substr(dash + 1), loc);
            break;
        }
    }
    return value;
}

void expand_cluster_means(ConfigFile& file, SimSpec& sim, double radius) {
    sim.id_cluster_means.assign(sim.num_classes,
                                std::vector<double>(sim.feature_dim, 0.0));
    for (std::size_t k = 0; k < sim.num_classes; ++k) {
        const std::size_t axis = k % sim.feature_dim;
        const double shell = 1.0 + std::floor(static_cast<double>(k) /
                                              static_cast<double>(sim.feature_dim));
        sim.id_cluster_means[k][axis] = radius * shell;
    }
    for (std::size_t k = 0; k < sim.num_classes; ++k) {
        const std::string key = "sim.id_cluster_mean_" + std::to_string(k);
        if (file.has(key)) {
            // Checked here, before the ood-mode expansion indexes into
            // these vectors; the late whole-spec validation is too late.
            auto mean = file.get_double_list(key);
            if (mean.size() != sim.feature_dim) {
                throw ConfigError(file.where(key) + ": cluster mean has " +
                                  std::to_string(mean.size()) +
                                  " entries, expected feature_dim = " +
                                  std::to_string(sim.feature_dim));
            }
            sim.id_cluster_means[k] = std::move(mean);
        }
    }
}

void expand_ood_modes(ConfigFile& file, SimSpec& sim) {
    const std::size_t count = get_count(file, "sim.ood_gauss_modes", 3, 0);
    const double scale = file.get_double("sim.ood_gauss_scale", 0.5);
    const double offset = file.get_double("sim.ood_axis_offset", 7.0);
    sim.ood_gauss_modes.assign(count, OodMode{});
    // Default modes: cluster means shifted along one shared feature axis
    // the clusters leave unused. Classification gives no signal on that
    // axis, so these unknowns are invisible to a purely class-trained
    // head; only the uncertainty branch can learn them.
    const std::size_t axis = sim.num_classes % sim.feature_dim;
    for (std::size_t j = 0; j < count; ++j) {
        const auto& anchor = sim.id_cluster_means[j % sim.num_classes];
        auto& mode = sim.ood_gauss_modes[j];
        mode.scale = scale;
        mode.mean = anchor;
        mode.mean[axis] += offset;
    }
    for (std::size_t j = 0; j < count; ++j) {
        const std::string key = "sim.ood_gauss_mean_" + std::to_string(j);
        if (file.has(key)) {
            auto mean = file.get_double_list(key);
            if (mean.size() != sim.feature_dim) {
                throw ConfigError(file.where(key) + ": mode mean has " +
                                  std::to_string(mean.size()) +
                                  " entries, expected feature_dim = " +
                                  std::to_string(sim.feature_dim));
            }
            sim.ood_gauss_modes[j].mean = std::move(mean);
        }
    }
}

}  // namespace

ExperimentConfig resolve_config(ConfigFile& file) {
    ExperimentConfig cfg;

    SimSpec& sim = cfg.sim;
    sim.num_classes = get_count(file, "sim.num_classes", 4, 2);
    sim.feature_dim = get_count(file, "sim.feature_dim", 16, 2);
    sim.frames_per_video = get_count(file, "sim.frames_per_video", 30, 1);
    sim.proposals_per_frame = get_count(file, "sim.proposals_per_frame", 24, 1);
    sim.id_cluster_scale = file.get_double("sim.id_cluster_scale", 0.4);
    sim.ood_box_halfwidth = file.get_double("sim.ood_box_halfwidth", 2.0);
    sim.ood_fraction_per_frame =
        file.get_double("sim.ood_fraction_per_frame", 0.3);
    sim.temporal_noise_scale = file.get_double("sim.temporal_noise_scale", 0.1);
    sim.objectness_id_mean = file.get_double("sim.objectness_id_mean", 0.85);
    sim.objectness_ood_mean = file.get_double("sim.objectness_ood_mean", 0.72);
    sim.objectness_noise_scale =
        file.get_double("sim.objectness_noise_scale", 0.08);
    sim.seed = file.get_uint64("sim.seed", 7);
    expand_cluster_means(file, sim,
                         file.get_double("sim.id_cluster_radius", 3.0));
    expand_ood_modes(file, sim);

    cfg.d_enc = get_count(file, "model.d_enc", 8, 1);
    const std::string nonlin = file.get_string("model.nonlinearity", "tanh");
    try {
        cfg.nonlin = parse_nonlinearity(nonlin);
    } catch (const ConfigError& e) {
        throw ConfigError(file.where("model.nonlinearity") + ": " + e.what());
    }

    cfg.train_videos = get_count(file, "train.videos", 40, 1);
    TrainConfig& train = cfg.train;
    train.beta = file.get_double("train.beta", 0.05);
    train.num_reference_frames =
        get_count(file, "train.num_reference_frames", 3, 1);
    const std::string range =
        file.get_string("train.sampling_range", format_range(9));
    train.sampling_range = parse_range(range, file.where("train.sampling_range"));
    train.percentile_lo = file.get_double("train.percentile_lo", 40.0);
    train.percentile_hi = file.get_double("train.percentile_hi", 60.0);
    train.learning_rate = file.get_double("train.learning_rate", 0.01);
    train.epochs = get_count(file, "train.epochs", 5, 1);
    train.key_frames_per_step = get_count(file, "train.key_frames_per_step", 1, 1);
    train.objectness_threshold =
        file.get_double("train.objectness_threshold", 0.5);
    const std::string eg = file.get_string("train.encoder_grad", "none");
    try {
        train.encoder_grad = parse_encoder_grad(eg);
    } catch (const ConfigError& e) {
        throw ConfigError(file.where("train.encoder_grad") + ": " + e.what());
    }
    train.seed = file.get_uint64("train.seed", 7);

    cfg.eval.eval_videos = get_count(file, "eval.videos", 8, 1);
    if (file.has("eval.methods")) {
        cfg.eval.methods.clear();
        for (const auto& token : file.get_list("eval.methods", {})) {
            try {
                cfg.eval.methods.push_back(parse_method(token));
            } catch (const ConfigError& e) {
                throw ConfigError(file.where("eval.methods") + ": " + e.what());
            }
        }
        if (cfg.eval.methods.empty()) {
            throw ConfigError(file.where("eval.methods") +
                              ": at least one method is required");
        }
        for (std::size_t i = 0; i < cfg.eval.methods.size(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                if (cfg.eval.methods[i] == cfg.eval.methods[j]) {
                    throw ConfigError(file.where("eval.methods") +
                                      ": duplicate method '" +
                                      method_name(cfg.eval.methods[i]) + "'");
                }
            }
        }
    }

    cfg.output_dir = file.get_string("output.dir", "out");

    if (file.has("sweep.axis") || file.has("sweep.values")) {
        SweepSpec sweep;
        const std::string axis = file.get_string("sweep.axis", "");
        if (axis.empty()) {
            throw ConfigError(file.where("sweep.values") +
                              ": sweep.values given without sweep.axis");
        }
        try {
            sweep.axis = parse_sweep_axis(axis);
        } catch (const ConfigError& e) {
            throw ConfigError(file.where("sweep.axis") + ": " + e.what());
        }
        const auto tokens = file.get_list("sweep.values", {});
        if (tokens.empty()) {
            throw ConfigError(file.where("sweep.axis") +
                              ": sweep needs a non-empty sweep.values list");
        }
        for (const auto& token : tokens) {
            sweep.values.push_back(
                parse_sweep_value(sweep.axis, token,
                                  file.where("sweep.values")));
        }
        for (std::size_t i = 0; i < sweep.values.size(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                if (sweep.values[i].token == sweep.values[j].token) {
                    throw ConfigError(file.where("sweep.values") +
                                      ": duplicate value '" +
                                      sweep.values[i].token + "'");
                }
            }
        }
        cfg.sweep = std::move(sweep);
    }

    const auto leftovers = file.unconsumed_keys();
    if (!leftovers.empty()) {
        std::string message = "unknown config key";
        if (leftovers.size() > 1) {
            message += "s";
        }
        for (const auto& entry : leftovers) {
            message += "\n  " + entry;
        }
        throw ConfigError(message);
    }

    validate_spec(cfg.sim);
    validate_train_config(cfg.train);
    if (cfg.sweep) {
        // Every sweep point must itself be a valid run configuration.
        for (const auto& value : cfg.sweep->values) {
            const ExperimentConfig point =
                apply_sweep_value(cfg, cfg.sweep->axis, value);
            validate_train_config(point.train);
        }
    }
    return cfg;
}

ExperimentConfig default_config() {
    ConfigFile file = ConfigFile::parse_text("", "<defaults>");
    return resolve_config(file);
}

ExperimentConfig load_config(const std::string& path) {
    ConfigFile file = ConfigFile::parse_file(path);
    return resolve_config(file);
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& base,
                                   SweepAxis axis, const SweepValue& value) {
    ExperimentConfig point = base;
    point.sweep.reset();
    switch (axis) {
        case SweepAxis::kT:
            point.train.num_reference_frames = value.t_value;
            break;
        case SweepAxis::kR:
            point.train.sampling_range = value.r_value;
            break;
        case SweepAxis::kBeta:
            point.train.beta = value.beta_value;
            break;
        case SweepAxis::kPercentile:
            point.train.percentile_lo = value.percentile_lo;
            point.train.percentile_hi = value.percentile_hi;
            break;
    }
    return point;
}

namespace {

void write_vector(std::ostream& out, const std::vector<double>& values) {
    out << "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) {
            out << ", ";
        }
        out << format_double(values[i]);
    }
    out << "]";
}

}  // namespace

void write_resolved_config(std::ostream& out, const ExperimentConfig& config) {
    const SimSpec& sim = config.sim;
    out << "sim.num_classes = " << sim.num_classes << "\n";
    out << "sim.feature_dim = " << sim.feature_dim << "\n";
    out << "sim.frames_per_video = " << sim.frames_per_video << "\n";
    out << "sim.proposals_per_frame = " << sim.proposals_per_frame << "\n";
    for (std::size_t k = 0; k < sim.id_cluster_means.size(); ++k) {
        out << "sim.id_cluster_mean_" << k << " = ";
        write_vector(out, sim.id_cluster_means[k]);
        out << "\n";
    }
    out << "sim.id_cluster_scale = " << format_double(sim.id_cluster_scale)
        << "\n";
    out << "sim.ood_gauss_modes = " << sim.ood_gauss_modes.size() << "\n";
    // One shared scale: the config surface has no per-mode scale key, so
    // this dump stays loadable as a config file.
    out << "sim.ood_gauss_scale = "
        << format_double(sim.ood_gauss_modes.empty()
                             ? 0.5
                             : sim.ood_gauss_modes.front().scale)
        << "\n";
    for (std::size_t j = 0; j < sim.ood_gauss_modes.size(); ++j) {
        out << "sim.ood_gauss_mean_" << j << " = ";
        write_vector(out, sim.ood_gauss_modes[j].mean);
        out << "\n";
    }
    out << "sim.ood_box_halfwidth = " << format_double(sim.ood_box_halfwidth)
        << "\n";
    out << "sim.ood_fraction_per_frame = "
        << format_double(sim.ood_fraction_per_frame) << "\n";
    out << "sim.temporal_noise_scale = "
        << format_double(sim.temporal_noise_scale) << "\n";
    out << "sim.objectness_id_mean = " << format_double(sim.objectness_id_mean)
        << "\n";
    out << "sim.objectness_ood_mean = "
        << format_double(sim.objectness_ood_mean) << "\n";
    out << "sim.objectness_noise_scale = "
        << format_double(sim.objectness_noise_scale) << "\n";
    out << "sim.seed = " << sim.seed << "\n";

    out << "model.d_enc = " << config.d_enc << "\n";
    out << "model.nonlinearity = " << nonlinearity_name(config.nonlin) << "\n";

    const TrainConfig& train = config.train;
    out << "train.videos = " << config.train_videos << "\n";
    out << "train.beta = " << format_double(train.beta) << "\n";
    out << "train.num_reference_frames = " << train.num_reference_frames
        << "\n";
    out << "train.sampling_range = " << format_range(train.sampling_range)
        << "\n";
    out << "train.percentile_lo = " << format_double(train.percentile_lo)
        << "\n";
    out << "train.percentile_hi = " << format_double(train.percentile_hi)
        << "\n";
    out << "train.learning_rate = " << format_double(train.learning_rate)
        << "\n";
    out << "train.epochs = " << train.epochs << "\n";
    out << "train.key_frames_per_step = " << train.key_frames_per_step << "\n";
    out << "train.objectness_threshold = "
        << format_double(train.objectness_threshold) << "\n";
    out << "train.encoder_grad = " << encoder_grad_name(train.encoder_grad)
        << "\n";
    out << "train.seed = " << train.seed << "\n";

    out << "eval.videos = " << config.eval.eval_videos << "\n";
    out << "eval.methods = [";
    for (std::size_t i = 0; i < config.eval.methods.size(); ++i) {
        if (i > 0) {
            out << ", ";
        }
        out << method_name(config.eval.methods[i]);
    }
    out << "]\n";

    out << "output.dir = " << config.output_dir << "\n";

    if (config.sweep) {
        out << "sweep.axis = " << sweep_axis_name(config.sweep->axis) << "\n";
        out << "sweep.values = [";
        for (std::size_t i = 0; i < config.sweep->values.size(); ++i) {
            if (i > 0) {
                out << ", ";
            }
            out << config.sweep->values[i].token;
        }
        out << "]\n";
    }
}

ValidationReport validate_config_file(const std::string& path) {
    ValidationReport report;
    ExperimentConfig cfg;
    try {
        cfg = load_config(path);
    } catch (const ConfigError& e) {
        report.errors.push_back(e.what());
        return report;
    }

    if (cfg.sim.ood_fraction_per_frame <= 0.0) {
        report.warnings.push_back(
            "ood_fraction_per_frame is 0: evaluation needs OOD objects and "
            "will fail");
    }
    const auto n = static_cast<double>(cfg.sim.proposals_per_frame);
    const auto n_ood = std::llround(cfg.sim.ood_fraction_per_frame * n);
    if (n_ood == 0 && cfg.sim.ood_fraction_per_frame > 0.0) {
        report.warnings.push_back(
            "ood_fraction_per_frame rounds to zero OOD proposals per frame");
    }
    if (n_ood == static_cast<long long>(cfg.sim.proposals_per_frame)) {
        report.warnings.push_back(
            "ood_fraction_per_frame rounds to zero ID proposals per frame: "
            "training cannot run");
    }
    if (cfg.sim.frames_per_video < 2 && cfg.train.beta > 0.0) {
        report.warnings.push_back(
            "frames_per_video < 2 leaves no reference frames; no unknowns "
            "will be distilled");
    }
    const long window = 2 * std::min<long>(cfg.train.sampling_range,
                                           static_cast<long>(
                                               cfg.sim.frames_per_video));
    if (window < static_cast<long>(cfg.train.num_reference_frames)) {
        report.warnings.push_back(
            "fewer than num_reference_frames frames ever fall inside the "
            "sampling range; distillation uses the whole window");
    }
    if (cfg.train.beta == 0.0) {
        report.warnings.push_back(
            "beta is 0: the uncertainty branch is disabled and theta_u "
            "stays at its initial value");
    }
    return report;
}

}  // namespace stud
