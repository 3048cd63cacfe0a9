#include "stud/model.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "stud/error.hpp"
#include "stud/mathutil.hpp"
#include "stud/text.hpp"

namespace stud {

std::string nonlinearity_name(Nonlinearity nl) {
    return nl == Nonlinearity::kTanh ? "tanh" : "identity";
}

Nonlinearity parse_nonlinearity(std::string_view token) {
    if (token == "tanh") return Nonlinearity::kTanh;
    if (token == "identity") return Nonlinearity::kIdentity;
    throw ConfigError("unknown nonlinearity '" + std::string(token) +
                      "' (expected tanh or identity)");
}

namespace {

void affine_forward(const AffineLayer& layer, std::span<const double> x,
                    std::vector<double>& y) {
    y.assign(layer.out_dim, 0.0);
    for (std::size_t o = 0; o < layer.out_dim; ++o) {
        double acc = layer.bias[o];
        const double* row = layer.weight.data() + o * layer.in_dim;
        for (std::size_t i = 0; i < layer.in_dim; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
}

// dW += dy (x) x, db += dy, and optionally dx = W^T dy.
void affine_backward(const AffineLayer& layer, std::span<const double> x,
                     std::span<const double> dy, AffineGrad& grad,
                     std::vector<double>* dx) {
    for (std::size_t o = 0; o < layer.out_dim; ++o) {
        double* grow = grad.weight.data() + o * layer.in_dim;
        for (std::size_t i = 0; i < layer.in_dim; ++i) grow[i] += dy[o] * x[i];
        grad.bias[o] += dy[o];
    }
    if (dx != nullptr) {
        dx->assign(layer.in_dim, 0.0);
        for (std::size_t o = 0; o < layer.out_dim; ++o) {
            const double* row = layer.weight.data() + o * layer.in_dim;
            for (std::size_t i = 0; i < layer.in_dim; ++i) {
                (*dx)[i] += row[i] * dy[o];
            }
        }
    }
}

double apply_nonlin(Nonlinearity nl, double x) {
    return nl == Nonlinearity::kTanh ? std::tanh(x) : x;
}

// Derivative expressed through the activation value a = sigma(z).
double nonlin_grad_from_value(Nonlinearity nl, double a) {
    return nl == Nonlinearity::kTanh ? 1.0 - a * a : 1.0;
}

}  // namespace

Gradients Gradients::zeros_like(const ModelParams& params) {
    Gradients g;
    g.enc1.weight.assign(params.enc1.weight.size(), 0.0);
    g.enc1.bias.assign(params.enc1.bias.size(), 0.0);
    g.enc2.weight.assign(params.enc2.weight.size(), 0.0);
    g.enc2.bias.assign(params.enc2.bias.size(), 0.0);
    g.pred.weight.assign(params.pred.weight.size(), 0.0);
    g.pred.bias.assign(params.pred.bias.size(), 0.0);
    g.theta_u = 0.0;
    return g;
}

namespace {

void axpy(std::vector<double>& dst, const std::vector<double>& src, double c) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += c * src[i];
}

}  // namespace

void Gradients::add_scaled(const Gradients& other, double coef) {
    axpy(enc1.weight, other.enc1.weight, coef);
    axpy(enc1.bias, other.enc1.bias, coef);
    axpy(enc2.weight, other.enc2.weight, coef);
    axpy(enc2.bias, other.enc2.bias, coef);
    axpy(pred.weight, other.pred.weight, coef);
    axpy(pred.bias, other.pred.bias, coef);
    theta_u += coef * other.theta_u;
}

ModelParams init_model(std::size_t feature_dim, std::size_t d_enc,
                       std::size_t num_classes, Nonlinearity nonlin,
                       std::uint64_t seed) {
    ModelParams params;
    params.enc1.resize(feature_dim, d_enc);
    params.enc2.resize(d_enc, d_enc);
    params.pred.resize(feature_dim, num_classes);
    params.theta_u = 1.0;
    params.nonlin = nonlin;

    Rng rng(seed);
    auto fill = [&rng](AffineLayer& layer) {
        const double a = 1.0 / std::sqrt(static_cast<double>(layer.in_dim));
        for (double& w : layer.weight) w = (2.0 * uniform01(rng) - 1.0) * a;
        // biases stay zero
    };
    fill(params.enc1);
    fill(params.enc2);
    fill(params.pred);
    return params;
}

std::vector<double> encode(const ModelParams& params, std::span<const double> h) {
    std::vector<double> z1;
    affine_forward(params.enc1, h, z1);
    for (double& v : z1) v = apply_nonlin(params.nonlin, v);
    std::vector<double> out;
    affine_forward(params.enc2, z1, out);
    return out;
}

std::vector<double> class_logits(const ModelParams& params,
                                 std::span<const double> h) {
    std::vector<double> f;
    affine_forward(params.pred, h, f);
    return f;
}

double energy(std::span<const double> logits) {
    return -log_sum_exp(logits);
}

double ood_probability(double energy_value, double theta_u) {
    return sigmoid(-theta_u * energy_value);
}

void backward_encode(const ModelParams& params, std::span<const double> h,
                     std::span<const double> d_encoded, Gradients& grads) {
    std::vector<double> z1;
    affine_forward(params.enc1, h, z1);
    std::vector<double> a1(z1.size());
    for (std::size_t i = 0; i < z1.size(); ++i) {
        a1[i] = apply_nonlin(params.nonlin, z1[i]);
    }

    std::vector<double> da1;
    affine_backward(params.enc2, a1, d_encoded, grads.enc2, &da1);
    for (std::size_t i = 0; i < da1.size(); ++i) {
        da1[i] *= nonlin_grad_from_value(params.nonlin, a1[i]);
    }
    affine_backward(params.enc1, h, da1, grads.enc1, nullptr);
}

void backward_class_logits(const ModelParams& params, std::span<const double> h,
                           std::span<const double> d_logits, Gradients& grads,
                           std::vector<double>* d_input) {
    affine_backward(params.pred, h, d_logits, grads.pred, d_input);
}

std::vector<double> backward_energy(std::span<const double> logits,
                                    double d_energy) {
    std::vector<double> p;
    softmax(logits, p);
    for (double& v : p) v *= -d_energy;
    return p;
}

OodProbabilityGrad backward_ood_probability(double energy_value, double theta_u,
                                            double d_probability) {
    const double p = ood_probability(energy_value, theta_u);
    const double dz = d_probability * p * (1.0 - p);  // z = -theta_u * E
    return {-theta_u * dz, -energy_value * dz};
}

void sgd_step(ModelParams& params, const Gradients& grads, double learning_rate) {
    axpy(params.enc1.weight, grads.enc1.weight, -learning_rate);
    axpy(params.enc1.bias, grads.enc1.bias, -learning_rate);
    axpy(params.enc2.weight, grads.enc2.weight, -learning_rate);
    axpy(params.enc2.bias, grads.enc2.bias, -learning_rate);
    axpy(params.pred.weight, grads.pred.weight, -learning_rate);
    axpy(params.pred.bias, grads.pred.bias, -learning_rate);
    params.theta_u -= learning_rate * grads.theta_u;
    if (params.theta_u < kThetaMin) params.theta_u = kThetaMin;
}

namespace {

void write_record(std::ostream& out, const std::string& name,
                  std::span<const std::size_t> dims,
                  std::span<const double> values) {
    out << name << ' ' << dims.size();
    for (std::size_t d : dims) out << ' ' << d;
    for (double v : values) out << ' ' << format_double(v);
    out << '\n';
}

struct Record {
    std::vector<std::size_t> dims;
    std::vector<double> values;
};

}  // namespace

void save_params(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    const double nonlin_code =
        params.nonlin == Nonlinearity::kTanh ? 0.0 : 1.0;
    write_record(out, "nonlinearity", std::array<std::size_t, 1>{1},
                 std::array<double, 1>{nonlin_code});
    write_record(out, "enc1.weight",
                 std::array<std::size_t, 2>{params.enc1.out_dim, params.enc1.in_dim},
                 params.enc1.weight);
    write_record(out, "enc1.bias", std::array<std::size_t, 1>{params.enc1.out_dim},
                 params.enc1.bias);
    write_record(out, "enc2.weight",
                 std::array<std::size_t, 2>{params.enc2.out_dim, params.enc2.in_dim},
                 params.enc2.weight);
    write_record(out, "enc2.bias", std::array<std::size_t, 1>{params.enc2.out_dim},
                 params.enc2.bias);
    write_record(out, "pred.weight",
                 std::array<std::size_t, 2>{params.pred.out_dim, params.pred.in_dim},
                 params.pred.weight);
    write_record(out, "pred.bias", std::array<std::size_t, 1>{params.pred.out_dim},
                 params.pred.bias);
    write_record(out, "theta_u", std::array<std::size_t, 1>{1},
                 std::array<double, 1>{params.theta_u});
}

ModelParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "' for reading");

    std::map<std::string, Record> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = path + ":" + std::to_string(line_no);
        std::istringstream ss(line);
        std::string name;
        if (!(ss >> name)) continue;
        std::size_t ndim = 0;
        if (!(ss >> ndim)) throw ConfigError(where + ": missing ndim");
        Record rec;
        std::size_t count = 1;
        for (std::size_t i = 0; i < ndim; ++i) {
            std::size_t d = 0;
            if (!(ss >> d)) throw ConfigError(where + ": missing dimension");
            rec.dims.push_back(d);
            count *= d;
        }
        std::string token;
        while (ss >> token) {
            rec.values.push_back(parse_double(token, where));
        }
        if (rec.values.size() != count) {
            throw ConfigError(where + ": expected " + std::to_string(count) +
                              " values, got " + std::to_string(rec.values.size()));
        }
        records[name] = std::move(rec);
    }

    auto need = [&records, &path](const std::string& name) -> Record& {
        auto it = records.find(name);
        if (it == records.end()) {
            throw ConfigError(path + ": missing record '" + name + "'");
        }
        return it->second;
    };
    auto load_layer = [&need](AffineLayer& layer, const std::string& prefix) {
        Record& w = need(prefix + ".weight");
        Record& b = need(prefix + ".bias");
        if (w.dims.size() != 2 || b.dims.size() != 1 || w.dims[0] != b.dims[0]) {
            throw ConfigError("inconsistent shapes for '" + prefix + "'");
        }
        layer.out_dim = w.dims[0];
        layer.in_dim = w.dims[1];
        layer.weight = std::move(w.values);
        layer.bias = std::move(b.values);
    };

    ModelParams params;
    params.nonlin = need("nonlinearity").values.at(0) == 0.0
                        ? Nonlinearity::kTanh
                        : Nonlinearity::kIdentity;
    load_layer(params.enc1, "enc1");
    load_layer(params.enc2, "enc2");
    load_layer(params.pred, "pred");
    params.theta_u = need("theta_u").values.at(0);
    if (!(params.theta_u > 0.0)) {
        throw ConfigError(path + ": theta_u must be > 0");
    }
    return params;
}

}  // namespace stud
