#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stud/distiller.hpp"
#include "stud/model.hpp"
#include "stud/sim.hpp"

// Training loop: per key frame, sample reference frames, distill unknowns
// under the current parameters, and take one SGD step on
// L = L_det + beta * L_uncertainty.

namespace stud {

enum class EncoderGrad { kNone, kThroughWeights };

std::string encoder_grad_name(EncoderGrad eg);
EncoderGrad parse_encoder_grad(std::string_view token);

struct TrainConfig {
    double beta = 0.05;
    std::size_t num_reference_frames = 3;  // T
    long sampling_range = 9;               // R; kInfiniteRange = whole video
    double percentile_lo = 40.0;           // p
    double percentile_hi = 60.0;           // q
    double learning_rate = 0.01;
    std::size_t epochs = 5;
    std::size_t key_frames_per_step = 1;
    double objectness_threshold = 0.5;
    EncoderGrad encoder_grad = EncoderGrad::kNone;
    std::uint64_t seed = 7;

    DistillSettings distill_settings() const {
        return {objectness_threshold, percentile_lo, percentile_hi};
    }
};

// Throws ConfigError naming the violated rule.
void validate_train_config(const TrainConfig& config);

struct TrainLogRecord {
    std::size_t step = 0;
    std::size_t epoch = 0;  // kept in memory; the CSV carries only `step`
    double loss_det = 0.0;
    double loss_unc = 0.0;
    double mean_energy_id = 0.0;
    double mean_energy_unknown = 0.0;  // NaN when no unknowns this step
    double theta_u = 0.0;
};

struct TrainLog {
    std::vector<TrainLogRecord> records;
};

// CSV with header step,loss_det,loss_unc,mean_E_id,mean_E_unknown,theta_u
void write_train_log_csv(const TrainLog& log, const std::string& path);

struct LabeledFeature {
    std::vector<double> feature;
    int label = 0;  // class id in [0, K)
};

struct LossValue {
    double value = 0.0;
    Gradients grads;
};

// Mean cross-entropy of class_logits against the ID labels.
LossValue detection_loss(const ModelParams& params,
                         std::span<const LabeledFeature> id_objects);

struct UncertaintyLoss {
    double value = 0.0;
    Gradients grads;
    double mean_energy_id = 0.0;
    double mean_energy_unknown = 0.0;
    // d(value)/d(E(o_hat_i)); consumed by the through_weights encoder path.
    std::vector<double> d_unknown_energy;
};

// Contrastive term: mean over unknowns of -log sigmoid(theta_u*E) plus
// mean over ID objects of -log sigmoid(-theta_u*E). Energies are
// recomputed under `params`; gradients flow into the prediction head and
// theta_u, not into the input features.
UncertaintyLoss uncertainty_loss(
    const ModelParams& params,
    std::span<const std::vector<double>> id_features,
    std::span<const std::vector<double>> unknown_features);

struct TrainResult {
    ModelParams params;
    TrainLog log;
};

// Bit-reproducible given (stream, initial params, config).
TrainResult train(const Stream& stream, const ModelParams& initial_params,
                  const TrainConfig& config);

}  // namespace stud
