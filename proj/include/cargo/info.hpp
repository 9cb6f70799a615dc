#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "cargo/types.hpp"

namespace cargo {

inline double clamp_probability(double p, double eps = kPosteriorEps) { return std::clamp(p, eps, 1.0 - eps); }

/// KL(Bernoulli(p) || Bernoulli(q)) in nats. Both arguments must lie in (0, 1).
inline double binary_kl(double p, double q) {
    if (p == q) return 0.0;
    const double kl = p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    return kl > 0.0 ? kl : 0.0;
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Mean over samples of KL(P(Y | z) || P_hat(Y)): the information the
/// context carries about the label. The marginal is clamped to [eps, 1-eps].
inline double context_information(std::span<const double> posterior_samples, double marginal,
                                  double eps = kPosteriorEps) {
    if (posterior_samples.empty()) return 0.0;
    const double q = clamp_probability(marginal, eps);
    double sum = 0.0;
    for (double p : posterior_samples) sum += binary_kl(clamp_probability(p, eps), q);
    return sum / static_cast<double>(posterior_samples.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double sample_stddev(std::span<const double> xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline double mean_of(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

}  // namespace cargo
