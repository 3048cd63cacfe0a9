#include "stud/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stud/error.hpp"
#include "stud/text.hpp"

namespace stud {

namespace {

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

Box random_box(Rng& rng) {
    Box b;
    b.x1 = uniform01(rng) * 90.0;
    b.y1 = uniform01(rng) * 90.0;
    b.x2 = b.x1 + 1.0 + uniform01(rng) * 9.0;
    b.y2 = b.y1 + 1.0 + uniform01(rng) * 9.0;
    return b;
}

void add_noise(std::vector<double>& v, double scale, Rng& rng) {
    for (double& x : v) x += scale * normal01(rng);
}

}  // namespace

void validate_spec(const SimSpec& spec) {
    if (spec.num_classes < 2) {
        throw ConfigError("sim.num_classes must be >= 2 (got " +
                          std::to_string(spec.num_classes) + ")");
    }
    if (spec.feature_dim < 2) {
        throw ConfigError("sim.feature_dim must be >= 2 (got " +
                          std::to_string(spec.feature_dim) + ")");
    }
    if (spec.frames_per_video < 1) {
        throw ConfigError("sim.frames_per_video must be >= 1");
    }
    if (spec.proposals_per_frame < 1) {
        throw ConfigError("sim.proposals_per_frame must be >= 1");
    }
    if (spec.id_cluster_means.size() != spec.num_classes) {
        throw ConfigError("sim.id_cluster_means must have one mean per class");
    }
    for (std::size_t k = 0; k < spec.id_cluster_means.size(); ++k) {
        const auto& mean = spec.id_cluster_means[k];
        if (mean.size() != spec.feature_dim) {
            throw ConfigError("sim.id_cluster_means[" + std::to_string(k) +
                              "] has dimension " + std::to_string(mean.size()) +
                              ", expected " + std::to_string(spec.feature_dim));
        }
        if (!all_finite(mean)) {
            throw ConfigError("sim.id_cluster_means[" + std::to_string(k) +
                              "] must be finite");
        }
        for (std::size_t l = 0; l < k; ++l) {
            if (mean == spec.id_cluster_means[l]) {
                throw ConfigError("sim.id_cluster_means must be pairwise "
                                  "distinct (means " + std::to_string(l) +
                                  " and " + std::to_string(k) + " coincide)");
            }
        }
    }
    for (std::size_t j = 0; j < spec.ood_gauss_modes.size(); ++j) {
        const auto& mode = spec.ood_gauss_modes[j];
        if (mode.mean.size() != spec.feature_dim || !all_finite(mode.mean)) {
            throw ConfigError("sim.ood_gauss_modes[" + std::to_string(j) +
                              "] mean must be finite with dimension " +
                              std::to_string(spec.feature_dim));
        }
        if (!(mode.scale >= 0.0)) {
            throw ConfigError("sim.ood_gauss_modes[" + std::to_string(j) +
                              "] scale must be >= 0");
        }
    }
    if (!(spec.ood_box_halfwidth >= 0.0)) {
        throw ConfigError("sim.ood_box_halfwidth must be >= 0");
    }
    if (!(spec.ood_fraction_per_frame >= 0.0 &&
          spec.ood_fraction_per_frame <= 1.0)) {
        throw ConfigError("sim.ood_fraction_per_frame must be in [0, 1]");
    }
    if (!(spec.id_cluster_scale >= 0.0)) {
        throw ConfigError("sim.id_cluster_scale must be >= 0");
    }
    if (!(spec.temporal_noise_scale >= 0.0)) {
        throw ConfigError("sim.temporal_noise_scale must be >= 0");
    }
    if (!(spec.objectness_noise_scale >= 0.0)) {
        throw ConfigError("sim.objectness_noise_scale must be >= 0");
    }
    if (!(spec.objectness_id_mean >= 0.0 && spec.objectness_id_mean <= 1.0) ||
        !(spec.objectness_ood_mean >= 0.0 && spec.objectness_ood_mean <= 1.0)) {
        throw ConfigError("sim.objectness means must be in [0, 1]");
    }
}

std::vector<FrameProposals> generate_video(const SimSpec& spec) {
    validate_spec(spec);
    Rng rng(spec.seed);

    const std::size_t n = spec.proposals_per_frame;
    const std::size_t m = spec.feature_dim;
    const auto n_ood = static_cast<std::size_t>(
        std::llround(spec.ood_fraction_per_frame * static_cast<double>(n)));
    const std::size_t n_id = n - n_ood;

    // Persistent identity of the ID objects: class + latent offset.
    std::vector<int> classes(n_id);
    std::vector<std::vector<double>> latents(n_id);
    for (std::size_t i = 0; i < n_id; ++i) {
        classes[i] = static_cast<int>(uniform_below(rng, spec.num_classes));
    }
    for (std::size_t i = 0; i < n_id; ++i) {
        latents[i].assign(m, 0.0);
        add_noise(latents[i], spec.id_cluster_scale, rng);
    }

    const std::size_t n_modes = spec.ood_gauss_modes.size() + 1;  // + box mode

    std::vector<FrameProposals> video(spec.frames_per_video);
    for (std::size_t t = 0; t < spec.frames_per_video; ++t) {
        FrameProposals& frame = video[t];
        frame.frame_index = t;
        frame.proposals.reserve(n);

        for (std::size_t i = 0; i < n_id; ++i) {
            ObjectProposal obj;
            obj.feature = spec.id_cluster_means[static_cast<std::size_t>(classes[i])];
            for (std::size_t d = 0; d < m; ++d) obj.feature[d] += latents[i][d];
            add_noise(obj.feature, spec.temporal_noise_scale, rng);
            obj.objectness = clamp01(spec.objectness_id_mean +
                                     spec.objectness_noise_scale * normal01(rng));
            obj.box = random_box(rng);
            obj.truth = Truth::id(classes[i]);
            frame.proposals.push_back(std::move(obj));
        }
        for (std::size_t j = 0; j < n_ood; ++j) {
            ObjectProposal obj;
            const std::size_t mode = uniform_below(rng, n_modes);
            if (mode < spec.ood_gauss_modes.size()) {
                obj.feature = spec.ood_gauss_modes[mode].mean;
                add_noise(obj.feature, spec.ood_gauss_modes[mode].scale, rng);
            } else {
                obj.feature.resize(m);
                const double w = spec.ood_box_halfwidth;
                for (std::size_t d = 0; d < m; ++d) {
                    obj.feature[d] = (2.0 * uniform01(rng) - 1.0) * w;
                }
            }
            obj.objectness = clamp01(spec.objectness_ood_mean +
                                     spec.objectness_noise_scale * normal01(rng));
            obj.box = random_box(rng);
            obj.truth = Truth::ood();
            frame.proposals.push_back(std::move(obj));
        }
        shuffle_in_place(frame.proposals, rng);
    }
    return video;
}

Stream generate_stream(const SimSpec& spec, std::size_t count,
                       std::uint64_t salt) {
    Stream stream(count);
    for (std::size_t v = 0; v < count; ++v) {
        SimSpec per_video = spec;
        per_video.seed = derive_seed(spec.seed ^ salt, v);
        stream[v].video_id = v;
        stream[v].frames = generate_video(per_video);
    }
    return stream;
}

std::vector<CollectedFeature> collect_features(const FrameProposals& frame,
                                               double objectness_threshold) {
    if (!(objectness_threshold >= 0.0 && objectness_threshold <= 1.0)) {
        throw ConfigError("objectness_threshold must be in [0, 1]");
    }
    std::vector<CollectedFeature> out;
    for (std::size_t i = 0; i < frame.proposals.size(); ++i) {
        if (frame.proposals[i].objectness >= objectness_threshold) {
            out.push_back({i, frame.proposals[i].feature});
        }
    }
    return out;
}

std::vector<std::size_t> sample_reference_frames(std::size_t video_len,
                                                 std::size_t key_index,
                                                 std::size_t num_frames,
                                                 long range, Rng& rng) {
    if (num_frames < 1 || range < 1) {
        throw ConfigError("reference sampling needs T >= 1 and R >= 1");
    }
    if (key_index >= video_len) {
        throw ConfigError("key_index out of range");
    }
    const long key = static_cast<long>(key_index);
    const long last = static_cast<long>(video_len) - 1;
    const long lo = std::max(0L, key - range);
    const long hi = std::min(last, key + range);

    std::vector<std::size_t> eligible;
    eligible.reserve(static_cast<std::size_t>(hi - lo + 1));
    for (long t = lo; t <= hi; ++t) {
        if (t != key) eligible.push_back(static_cast<std::size_t>(t));
    }
    if (eligible.size() <= num_frames) {
        return eligible;  // may be empty: distillation unavailable
    }
    // Partial Fisher-Yates, then sort the chosen prefix.
    for (std::size_t i = 0; i < num_frames; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(uniform_below(rng, eligible.size() - i));
        std::swap(eligible[i], eligible[j]);
    }
    eligible.resize(num_frames);
    std::sort(eligible.begin(), eligible.end());
    return eligible;
}

namespace {

std::string truth_token(const Truth& t) {
    return t.is_ood() ? "ood" : ("id:" + std::to_string(t.class_id));
}

Truth parse_truth(std::string_view token, const std::string& where) {
    if (token == "ood") return Truth::ood();
    if (token.substr(0, 3) == "id:") {
        return Truth::id(static_cast<int>(
            parse_int(token.substr(3), where + ": truth class")));
    }
    throw ConfigError(where + ": bad truth token '" + std::string(token) + "'");
}

}  // namespace

void dump_stream(const Stream& stream, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    for (const Video& video : stream) {
        for (const FrameProposals& frame : video.frames) {
            for (const ObjectProposal& p : frame.proposals) {
                out << video.video_id << ',' << frame.frame_index << ','
                    << format_double(p.box.x1) << ',' << format_double(p.box.y1)
                    << ',' << format_double(p.box.x2) << ','
                    << format_double(p.box.y2) << ','
                    << format_double(p.objectness) << ',' << truth_token(p.truth);
                for (double f : p.feature) out << ',' << format_double(f);
                out << '\n';
            }
        }
    }
}

Stream load_stream(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "' for reading");
    Stream stream;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = path + ":" + std::to_string(line_no);
        std::string_view rest = trim(line);
        if (rest.empty()) continue;

        std::vector<std::string_view> fields;
        while (true) {
            const auto pos = rest.find(',');
            if (pos == std::string_view::npos) {
                fields.push_back(rest);
                break;
            }
            fields.push_back(rest.substr(0, pos));
            rest.remove_prefix(pos + 1);
        }
        if (fields.size() < 9) {
            throw ConfigError(where + ": expected at least 9 fields");
        }
        const auto video_id =
            static_cast<std::size_t>(parse_uint64(fields[0], where + ": video_id"));
        const auto frame_index = static_cast<std::size_t>(
            parse_uint64(fields[1], where + ": frame_index"));

        ObjectProposal p;
        p.box.x1 = parse_double(fields[2], where + ": x1");
        p.box.y1 = parse_double(fields[3], where + ": y1");
        p.box.x2 = parse_double(fields[4], where + ": x2");
        p.box.y2 = parse_double(fields[5], where + ": y2");
        p.objectness = parse_double(fields[6], where + ": objectness");
        p.truth = parse_truth(fields[7], where);
        p.feature.reserve(fields.size() - 8);
        for (std::size_t i = 8; i < fields.size(); ++i) {
            p.feature.push_back(parse_double(fields[i], where + ": feature"));
        }

        if (stream.empty() || stream.back().video_id != video_id) {
            stream.push_back(Video{video_id, {}});
        }
        Video& video = stream.back();
        if (video.frames.empty() ||
            video.frames.back().frame_index != frame_index) {
            video.frames.push_back(FrameProposals{frame_index, {}});
        }
        video.frames.back().proposals.push_back(std::move(p));
    }
    return stream;
}

}  // namespace stud
