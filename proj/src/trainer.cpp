#include "stud/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "stud/error.hpp"
#include "stud/mathutil.hpp"
#include "stud/text.hpp"

namespace stud {

std::string encoder_grad_name(EncoderGrad eg) {
    return eg == EncoderGrad::kNone ? "none" : "through_weights";
}

EncoderGrad parse_encoder_grad(std::string_view token) {
    if (token == "none") return EncoderGrad::kNone;
    if (token == "through_weights") return EncoderGrad::kThroughWeights;
    throw ConfigError("unknown encoder_grad '" + std::string(token) +
                      "' (expected none or through_weights)");
}

void validate_train_config(const TrainConfig& config) {
    if (!(config.beta >= 0.0)) {
        throw ConfigError("train.beta must be >= 0");
    }
    if (!(config.percentile_lo >= 0.0 &&
          config.percentile_lo < config.percentile_hi &&
          config.percentile_hi <= 100.0)) {
        throw ConfigError("train percentiles must satisfy 0 <= p < q <= 100");
    }
    if (!(config.learning_rate > 0.0)) {
        throw ConfigError("train.learning_rate must be > 0");
    }
    if (config.num_reference_frames < 1) {
        throw ConfigError("train.T must be >= 1");
    }
    if (config.sampling_range < 1) {
        throw ConfigError("train.R must be >= 1 (or inf)");
    }
    if (config.epochs < 1) {
        throw ConfigError("train.epochs must be >= 1");
    }
    if (config.key_frames_per_step < 1) {
        throw ConfigError("train.key_frames_per_step must be >= 1");
    }
    if (!(config.objectness_threshold >= 0.0 &&
          config.objectness_threshold <= 1.0)) {
        throw ConfigError("train.objectness_threshold must be in [0, 1]");
    }
}

LossValue detection_loss(const ModelParams& params,
                         std::span<const LabeledFeature> id_objects) {
    if (id_objects.empty()) {
        throw ConfigError("detection_loss needs at least one labeled object");
    }
    LossValue out;
    out.grads = Gradients::zeros_like(params);
    const double inv_n = 1.0 / static_cast<double>(id_objects.size());

    std::vector<double> p;
    for (const LabeledFeature& obj : id_objects) {
        if (obj.label < 0 ||
            static_cast<std::size_t>(obj.label) >= params.num_classes()) {
            throw ConfigError("detection_loss: label out of range");
        }
        const std::vector<double> f = class_logits(params, obj.feature);
        const double lse = log_sum_exp(f);
        out.value += (lse - f[static_cast<std::size_t>(obj.label)]) * inv_n;

        softmax(f, p);
        p[static_cast<std::size_t>(obj.label)] -= 1.0;
        for (double& v : p) v *= inv_n;
        backward_class_logits(params, obj.feature, p, out.grads);
    }
    return out;
}

UncertaintyLoss uncertainty_loss(
    const ModelParams& params,
    std::span<const std::vector<double>> id_features,
    std::span<const std::vector<double>> unknown_features) {
    if (id_features.empty() || unknown_features.empty()) {
        throw ConfigError("uncertainty_loss needs both ID objects and unknowns");
    }
    UncertaintyLoss out;
    out.grads = Gradients::zeros_like(params);
    out.d_unknown_energy.resize(unknown_features.size());

    const double theta = params.theta_u;
    const double inv_unknown = 1.0 / static_cast<double>(unknown_features.size());
    const double inv_id = 1.0 / static_cast<double>(id_features.size());

    // Unknowns: -log sigmoid(theta * E), pushed toward high energy.
    for (std::size_t i = 0; i < unknown_features.size(); ++i) {
        const std::vector<double> f = class_logits(params, unknown_features[i]);
        const double e = energy(f);
        out.mean_energy_unknown += e * inv_unknown;
        out.value += softplus(-theta * e) * inv_unknown;

        const double d_e = -theta * sigmoid(-theta * e) * inv_unknown;
        out.d_unknown_energy[i] = d_e;
        out.grads.theta_u += -e * sigmoid(-theta * e) * inv_unknown;
        backward_class_logits(params, unknown_features[i],
                              backward_energy(f, d_e), out.grads);
    }
    // ID objects: -log sigmoid(-theta * E), pushed toward low energy.
    for (const std::vector<double>& h : id_features) {
        const std::vector<double> f = class_logits(params, h);
        const double e = energy(f);
        out.mean_energy_id += e * inv_id;
        out.value += softplus(theta * e) * inv_id;

        const double d_e = theta * sigmoid(theta * e) * inv_id;
        out.grads.theta_u += e * sigmoid(theta * e) * inv_id;
        backward_class_logits(params, h, backward_energy(f, d_e), out.grads);
    }
    return out;
}

namespace {

double mean_energy(const ModelParams& params,
                   std::span<const LabeledFeature> objects) {
    double acc = 0.0;
    for (const LabeledFeature& obj : objects) {
        acc += energy(class_logits(params, obj.feature));
    }
    return acc / static_cast<double>(objects.size());
}

// Per-key-frame distillation cache, kept for the through_weights path.
struct DistillGroup {
    std::vector<std::vector<double>> key_features;
    std::vector<DistilledUnknown> unknowns;
    CandidatePool pool;
};

}  // namespace

TrainResult train(const Stream& stream, const ModelParams& initial_params,
                  const TrainConfig& config) {
    validate_train_config(config);
    std::size_t total_frames = 0;
    for (const Video& v : stream) total_frames += v.frames.size();
    if (total_frames < 2) {
        throw ConfigError("training stream must contain at least 2 frames");
    }

    struct KeyRef {
        std::size_t video;
        std::size_t frame;
    };
    std::vector<KeyRef> keys;
    keys.reserve(total_frames);
    for (std::size_t v = 0; v < stream.size(); ++v) {
        for (std::size_t t = 0; t < stream[v].frames.size(); ++t) {
            keys.push_back({v, t});
        }
    }

    const DistillSettings settings = config.distill_settings();
    ModelParams params = initial_params;
    Rng rng(config.seed);
    TrainResult result;
    std::size_t step = 0;

    std::vector<std::size_t> order(keys.size());
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        shuffle_in_place(order, rng);

        for (std::size_t pos = 0; pos < order.size();
             pos += config.key_frames_per_step) {
            const std::size_t end =
                std::min(order.size(), pos + config.key_frames_per_step);

            std::vector<LabeledFeature> id_objects;
            std::vector<std::vector<double>> id_features;
            std::vector<std::vector<double>> unknown_features;
            std::vector<DistillGroup> groups;

            for (std::size_t b = pos; b < end; ++b) {
                const KeyRef key = keys[order[b]];
                const Video& video = stream[key.video];
                const FrameProposals& key_frame = video.frames[key.frame];

                std::vector<std::vector<double>> key_feats;
                for (const auto& c : collect_features(
                         key_frame, config.objectness_threshold)) {
                    const ObjectProposal& proposal = key_frame.proposals[c.index];
                    if (proposal.truth.is_ood()) continue;
                    id_objects.push_back({c.feature, proposal.truth.class_id});
                    id_features.push_back(c.feature);
                    key_feats.push_back(c.feature);
                }
                if (key_feats.empty() || config.beta == 0.0) continue;

                const auto refs = sample_reference_frames(
                    video.frames.size(), key.frame,
                    config.num_reference_frames, config.sampling_range, rng);
                if (refs.empty()) continue;

                std::vector<CandidateSet> sets;
                sets.reserve(refs.size());
                for (std::size_t t : refs) {
                    sets.push_back(
                        select_candidates(params, video.frames[t], settings));
                }
                DistillGroup group;
                group.pool = pool_candidates(sets);
                group.unknowns =
                    distill_from_pool(params, key_feats, group.pool);
                if (group.unknowns.empty()) continue;

                for (const DistilledUnknown& u : group.unknowns) {
                    unknown_features.push_back(u.feature);
                }
                group.key_features = std::move(key_feats);
                groups.push_back(std::move(group));
            }
            if (id_objects.empty()) continue;  // no optimizer step

            LossValue det = detection_loss(params, id_objects);
            Gradients total = std::move(det.grads);

            double loss_unc = 0.0;
            double mean_e_id;
            double mean_e_unknown = std::numeric_limits<double>::quiet_NaN();
            if (config.beta > 0.0 && !unknown_features.empty()) {
                UncertaintyLoss unc =
                    uncertainty_loss(params, id_features, unknown_features);
                if (config.encoder_grad == EncoderGrad::kThroughWeights) {
                    std::size_t offset = 0;
                    for (const DistillGroup& group : groups) {
                        add_encoder_grads_through_weights(
                            params, group.key_features, group.unknowns,
                            group.pool,
                            std::span<const double>(unc.d_unknown_energy)
                                .subspan(offset, group.unknowns.size()),
                            unc.grads);
                        offset += group.unknowns.size();
                    }
                }
                total.add_scaled(unc.grads, config.beta);
                loss_unc = unc.value;
                mean_e_id = unc.mean_energy_id;
                mean_e_unknown = unc.mean_energy_unknown;
            } else {
                mean_e_id = mean_energy(params, id_objects);
            }

            sgd_step(params, total, config.learning_rate);
            result.log.records.push_back({step, epoch, det.value, loss_unc,
                                          mean_e_id, mean_e_unknown,
                                          params.theta_u});
            ++step;
        }
    }
    result.params = std::move(params);
    return result;
}

void write_train_log_csv(const TrainLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << "step,loss_det,loss_unc,mean_E_id,mean_E_unknown,theta_u\n";
    for (const TrainLogRecord& r : log.records) {
        out << r.step << ',' << format_double(r.loss_det) << ','
            << format_double(r.loss_unc) << ','
            << format_double(r.mean_energy_id) << ','
            << format_double(r.mean_energy_unknown) << ','
            << format_double(r.theta_u) << '\n';
    }
}

}  // namespace stud
