#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stud/rng.hpp"

// The trainable pieces: a two-layer dissimilarity encoder h -> h_hat, a
// K-way affine prediction head producing class logits, and the positive
// uncertainty slope theta_u. Forward ops are pure; backward ops return
// exact analytic gradients for the closed op set (no general autodiff).

namespace stud {

enum class Nonlinearity { kTanh, kIdentity };

std::string nonlinearity_name(Nonlinearity nl);
Nonlinearity parse_nonlinearity(std::string_view token);

struct AffineLayer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weight;  // out_dim x in_dim, row-major
    std::vector<double> bias;    // out_dim

    void resize(std::size_t in, std::size_t out) {
        in_dim = in;
        out_dim = out;
        weight.assign(in * out, 0.0);
        bias.assign(out, 0.0);
    }
};

struct ModelParams {
    AffineLayer enc1;  // feature_dim -> d_enc
    AffineLayer enc2;  // d_enc -> d_enc
    AffineLayer pred;  // feature_dim -> num_classes
    double theta_u = 1.0;
    Nonlinearity nonlin = Nonlinearity::kTanh;

    std::size_t feature_dim() const { return pred.in_dim; }
    std::size_t num_classes() const { return pred.out_dim; }
    std::size_t encoded_dim() const { return enc2.out_dim; }
};

struct AffineGrad {
    std::vector<double> weight;
    std::vector<double> bias;
};

// Mirrors ModelParams; accumulated per batch.
struct Gradients {
    AffineGrad enc1, enc2, pred;
    double theta_u = 0.0;

    static Gradients zeros_like(const ModelParams& params);
    void add_scaled(const Gradients& other, double coef);
};

// Weights uniform in [-a, a], a = 1 / sqrt(fan_in); biases zero; theta_u 1.
ModelParams init_model(std::size_t feature_dim, std::size_t d_enc,
                       std::size_t num_classes, Nonlinearity nonlin,
                       std::uint64_t seed);

// h_hat = enc2(sigma(enc1(h)))
std::vector<double> encode(const ModelParams& params, std::span<const double> h);

// f = pred.weight * h + pred.bias
std::vector<double> class_logits(const ModelParams& params,
                                 std::span<const double> h);

// E = -logsumexp(f), max-subtracted.
double energy(std::span<const double> logits);

// sigmoid(-theta_u * E): the probability of the object being ID.
double ood_probability(double energy_value, double theta_u);

// Accumulates encoder gradients for d(loss)/d(h_hat) = d_encoded.
void backward_encode(const ModelParams& params, std::span<const double> h,
                     std::span<const double> d_encoded, Gradients& grads);

// Accumulates prediction-head gradients for d(loss)/d(logits) = d_logits.
// When d_input is non-null it receives d(loss)/d(h) (resized to h.size()).
void backward_class_logits(const ModelParams& params, std::span<const double> h,
                           std::span<const double> d_logits, Gradients& grads,
                           std::vector<double>* d_input = nullptr);

// d(energy)/d(f_k) = -softmax(f)_k, scaled by d_energy.
std::vector<double> backward_energy(std::span<const double> logits,
                                    double d_energy);

struct OodProbabilityGrad {
    double d_energy = 0.0;
    double d_theta_u = 0.0;
};

OodProbabilityGrad backward_ood_probability(double energy_value, double theta_u,
                                            double d_probability);

// One plain SGD step; theta_u is clamped to >= kThetaMin afterwards.
inline constexpr double kThetaMin = 1e-6;
void sgd_step(ModelParams& params, const Gradients& grads, double learning_rate);

// Flat record file: one record per line, "name ndim dims... values...",
// doubles at 17 significant digits (exact round-trip).
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

}  // namespace stud
