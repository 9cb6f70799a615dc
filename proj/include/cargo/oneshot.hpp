#pragma once

// Phase 1: per-sequence Markov-boundary extraction. For every position after
// the context window the label posterior is compared before and after the
// next event; the expectation over the context is approximated by resampling
// the first `context` tokens N times from the estimator's own next-event
// distribution (top-k then nucleus filtering) while keeping the real suffix.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "cargo/estimator.hpp"
#include "cargo/random.hpp"
#include "cargo/types.hpp"

namespace cargo {

struct OneShotConfig {
    std::size_t context = 15;
    std::size_t samples = 68;
    std::size_t top_k = 35;
    double top_p = 0.8;
    double threshold_k = 2.75;
    double eps = kPosteriorEps;
    std::size_t max_len = 192;

    void validate() const;
};

/// Keeps the top_k most probable tokens, then drops every token whose
/// cumulative mass (in descending order) exceeds top_p, always keeping the
/// first, and renormalises. Ties are broken by the lower event id. Returns
/// (event, probability) pairs in descending probability order.
std::vector<std::pair<EventId, double>> top_k_top_p_filter(std::span<const double> dist, std::size_t top_k, double top_p);

/// N alternative sequences: position 0 is the start marker, positions
/// 1..context-1 are drawn independently from the filtered next-event
/// distribution given the real prefix before them, and positions >= context
/// keep the real events.
std::vector<std::vector<EventId>> sample_prefixes(const ConditionalEstimator& estimator, std::span<const EventId> events,
                                                  const OneShotConfig& config, Rng& rng);

/// Per-position, per-label statistics over the sampled variants. Column i
/// (first_position <= i < first_position + positions) compares the posterior
/// after events[0..i] with the one after events[0..i+1].
struct CmiMatrix {
    std::size_t first_position = 0;
    std::size_t positions = 0;
    std::size_t labels = 0;
    Matrix cmi;      // [position - first_position][label], nats
    Matrix cs_mean;  // mean of p1 - p0
    Matrix cs_std;   // sample std of p1 - p0
    Matrix ig_z;     // mean KL(p0 || marginal); zero when no marginals were given

    bool empty() const { return positions == 0; }
};

/// Averages the binary KL between consecutive posteriors over the variants.
/// Variants shorter than context + 2 events give an empty matrix.
/// `label_marginals`, when non-empty, enables the I(Y_j, Z) column.
CmiMatrix cmi_profile(const ConditionalEstimator& estimator, const std::vector<std::vector<EventId>>& variants,
                      const OneShotConfig& config, const QueryContext& ctx = {},
                      std::span<const double> label_marginals = {});

struct Detections {
    std::vector<double> threshold;  // per label: mean + k * sample std over positions
    std::vector<std::vector<std::uint8_t>> mask;  // [position][label]
};

/// Label-wise threshold mean + k * std (sample std, 0 for a single position);
/// a cell is flagged when its CMI is >= the threshold.
Detections dynamic_threshold(const CmiMatrix& matrix, double threshold_k);

/// Runs the three steps above for one sequence and keeps, per label, the
/// flagged positions with strictly positive CMI. The cause is the event at
/// position + 1; repeated events keep their highest-CMI occurrence. The RNG
/// stream is derived from (seed, sequence id).
LocalGraph discover_sequence(const ConditionalEstimator& estimator, const LabeledSequence& sequence,
                             const OneShotConfig& config, std::uint64_t seed,
                             std::span<const double> label_marginals = {});

struct DiscoveryResult {
    std::vector<LocalGraph> graphs;  // same order as the input; skipped sequences are absent
    std::size_t skipped = 0;         // sequences shorter than context + 2 after truncation
};

/// discover_sequence over a batch on `workers` threads. The output does not
/// depend on the worker count.
DiscoveryResult discover_batch(const ConditionalEstimator& estimator, std::span<const LabeledSequence> sequences,
                               const OneShotConfig& config, std::uint64_t seed, std::size_t workers,
                               std::span<const double> label_marginals = {});

/// Empirical P(Y_j = 1) over a corpus.
std::vector<double> label_marginals(std::span<const LabeledSequence> sequences, std::size_t num_labels);

}  // namespace cargo
