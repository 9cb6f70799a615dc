#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cargo/types.hpp"

namespace cargo {

/// Extra call arguments for estimators whose output depends on which
/// sequence is being explained (the noisy wrapper). Pure estimators ignore it.
struct QueryContext {
    std::uint64_t sequence_key = 0;
};

/// Autoregressive density-estimator pair: a next-event model and a per-label
/// Bernoulli posterior model, both conditioned on an event prefix that starts
/// with the start marker.
///
/// Implementations are immutable after construction and every call is a pure
/// function of its arguments, so one instance can be shared by all workers.
class ConditionalEstimator {
public:
    virtual ~ConditionalEstimator() = default;

    /// Size of the event vocabulary, start marker included.
    virtual std::size_t num_events() const = 0;
    virtual std::size_t num_labels() const = 0;

    /// P(next event | prefix); sums to 1 and never puts mass on the marker.
    virtual std::vector<double> next_event_dist(std::span<const EventId> prefix) const = 0;

    /// Row r holds P(Y_j = 1 | events[0..r]) for every label, clamped to
    /// [kPosteriorEps, 1 - kPosteriorEps]. Returns events.size() rows.
    virtual Matrix label_posterior_path(std::span<const EventId> events, const QueryContext& ctx = {}) const = 0;

    /// Posteriors after the whole prefix.
    std::vector<double> label_posteriors(std::span<const EventId> prefix, const QueryContext& ctx = {}) const;
};

}  // namespace cargo
