#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "cargo/estimator.hpp"

namespace cargo {

/// Count-based estimator fitted on a corpus.
///
/// Next event: order-h Markov counts with additive smoothing,
/// (count + delta) / (row total + delta * |real events|). A context never
/// seen in training backs off to the next shorter context, down to unigram
/// counts. The start marker never gets mass.
///
/// Labels: presence-feature naive Bayes. Every event present in the prefix
/// adds log[P(e present | y=1) / P(e present | y=0)] to the prior log-odds,
/// with add-one smoothing on all frequencies. Absence is not evidence,
/// because an event missing from a prefix may still occur later.
class NGramEstimator final : public ConditionalEstimator {
public:
    std::size_t num_events() const override { return num_events_; }
    std::size_t num_labels() const override { return prior_log_odds_.size(); }
    std::vector<double> next_event_dist(std::span<const EventId> prefix) const override;
    Matrix label_posterior_path(std::span<const EventId> events, const QueryContext& ctx = {}) const override;

    std::size_t order() const { return order_; }
    double delta() const { return delta_; }

private:
    friend NGramEstimator fit_ngram(std::span<const LabeledSequence>, std::size_t, std::size_t, std::size_t, double);

    std::size_t num_events_ = 0;
    std::size_t order_ = 1;
    double delta_ = 1.0;
    struct Row {
        std::uint64_t total = 0;
        std::map<EventId, std::uint64_t> counts;
    };
    // counts_[h] maps a length-h context to next-event counts (h = 0..order).
    std::vector<std::map<std::vector<EventId>, Row>> counts_;
    std::vector<double> prior_log_odds_;  // per label
    Matrix evidence_;                     // [event][label] log-likelihood ratio of presence
};

/// Throws std::invalid_argument for an empty corpus, order 0, delta <= 0,
/// or an order longer than the shortest sequence.
NGramEstimator fit_ngram(std::span<const LabeledSequence> corpus, std::size_t num_events, std::size_t num_labels,
                         std::size_t order, double delta);

}  // namespace cargo
