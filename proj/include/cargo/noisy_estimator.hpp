#pragma once

#include <cstdint>
#include <memory>
#include <mutex>

#include "cargo/estimator.hpp"

namespace cargo {

struct NoiseConfig {
    double alpha = 0.0;      // per (position, label) chance of a spurious posterior jump
    double beta = 0.0;       // per (position, label) chance that a posterior change is suppressed
    double magnitude = 3.0;  // size of a spurious jump, in logit units
    std::uint64_t seed = 0;

    void validate() const;
};

/// Wraps another estimator and turns it into an imperfect CI tester.
///
/// Walking along the inner posterior path, each (position, label) draws two
/// Bernoulli variables from a stream keyed by (seed, sequence key, position,
/// label). A miss (probability beta) drops the posterior change at that
/// position, so the event produces zero CMI; a false alarm (probability
/// alpha) adds a jump of +/- magnitude in logit space. Once a label's path
/// has been perturbed it evolves in logit space as previous + inner change,
/// and until then it is the inner path bit for bit. Every variant of a
/// sequence shares its key, so misses and false alarms are consistent across
/// the Monte-Carlo samples of one sequence.
///
/// Next-event distributions pass through unchanged.
class NoisyEstimator final : public ConditionalEstimator {
public:
    NoisyEstimator(std::shared_ptr<const ConditionalEstimator> inner, NoiseConfig config);

    std::size_t num_events() const override { return inner_->num_events(); }
    std::size_t num_labels() const override { return inner_->num_labels(); }
    std::vector<double> next_event_dist(std::span<const EventId> prefix) const override {
        return inner_->next_event_dist(prefix);
    }
    Matrix label_posterior_path(std::span<const EventId> events, const QueryContext& ctx = {}) const override;

    const NoiseConfig& config() const { return config_; }

private:
    std::shared_ptr<const ConditionalEstimator> inner_;
    NoiseConfig config_;
    mutable std::once_flag clamp_warning_;
};

/// One step of the noise model: the noisy posterior at a position given the
/// noisy posterior before it and the inner posteriors before and after.
/// `miss` and `spurious` are the position's Bernoulli outcomes and `sign`
/// the direction of a spurious jump. Returns the unclamped value.
double noisy_label_posterior(double noisy_prev, double inner_prev, double inner_now, bool miss, bool spurious,
                             bool sign_up, double magnitude);

}  // namespace cargo
