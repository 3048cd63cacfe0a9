#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace stud {

// log(sum(exp(x))) with max-subtraction.
inline double log_sum_exp(std::span<const double> x) {
    const double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

// exp(x_i - max) / sum, written into out (resized to x.size()).
inline void softmax(std::span<const double> x, std::vector<double>& out) {
    out.resize(x.size());
    const double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - m);
        s += out[i];
    }
    for (double& v : out) v /= s;
}

// 1 / (1 + exp(-x)), stable on both tails.
inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + exp(x)), stable on both tails.
inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double squared_l2_distance(std::span<const double> a,
                                  std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace stud
