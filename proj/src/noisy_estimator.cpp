#include "cargo/noisy_estimator.hpp"

#include <spdlog/spdlog.h>

#include <stdexcept>

#include "cargo/info.hpp"
#include "cargo/random.hpp"

namespace cargo {

namespace {

// Counter-based draws: a uniform in [0, 1) from a hashed key.
double hashed_uniform(std::uint64_t key) { return static_cast<double>(mix64(key) >> 11) * 0x1.0p-53; }

}  // namespace

void NoiseConfig::validate() const {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("noise alpha must lie in [0, 1)");
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("noise beta must lie in [0, 1]");
    if (!(magnitude >= 0.0)) throw std::invalid_argument("noise magnitude must be non-negative");
}

NoisyEstimator::NoisyEstimator(std::shared_ptr<const ConditionalEstimator> inner, NoiseConfig config)
    : inner_(std::move(inner)), config_(config) {
    if (!inner_) throw std::invalid_argument("noisy estimator needs an inner estimator");
    config_.validate();
}

double noisy_label_posterior(double noisy_prev, double inner_prev, double inner_now, bool miss, bool spurious, bool sign_up,
                             double magnitude) {
    double step = miss ? 0.0 : logit(inner_now) - logit(inner_prev);
    if (spurious) step += sign_up ? magnitude : -magnitude;
    if (step == 0.0) return noisy_prev;
    return sigmoid(logit(noisy_prev) + step);
}

Matrix NoisyEstimator::label_posterior_path(std::span<const EventId> events, const QueryContext& ctx) const {
    Matrix path = inner_->label_posterior_path(events, ctx);
    if (config_.alpha == 0.0 && config_.beta == 0.0) return path;

    const Matrix inner = path;
    bool clamped = false;
    for (std::size_t j = 0; j < path.cols(); ++j) {
        bool diverged = false;
        for (std::size_t r = 1; r < path.rows(); ++r) {
            const std::uint64_t key = derive_seed({config_.seed, ctx.sequence_key, r, j});
            const bool miss = hashed_uniform(key ^ 0x1ULL) < config_.beta;
            const bool spurious = hashed_uniform(key ^ 0x2ULL) < config_.alpha;
            const bool sign_up = (mix64(key ^ 0x3ULL) & 1ULL) != 0;
            const bool changed = inner(r, j) != inner(r - 1, j);
            if (!diverged && !spurious && !(miss && changed)) continue;  // still the inner value
            diverged = true;
            const double raw = noisy_label_posterior(path(r - 1, j), inner(r - 1, j), inner(r, j), miss, spurious, sign_up,
                                                     config_.magnitude);
            const double p = clamp_probability(raw);
            clamped = clamped || p != raw;
            path(r, j) = p;
        }
    }
    if (clamped) {
        std::call_once(clamp_warning_, [] { spdlog::warn("noisy estimator: posterior left [eps, 1-eps] and was clamped"); });
    }
    return path;
}

}  // namespace cargo
