#include "cargo/ngram_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cargo/info.hpp"

namespace cargo {

NGramEstimator fit_ngram(std::span<const LabeledSequence> corpus, std::size_t num_events, std::size_t num_labels,
                         std::size_t order, double delta) {
    if (corpus.empty()) throw std::invalid_argument("n-gram corpus is empty");
    if (order < 1) throw std::invalid_argument("n-gram order must be at least 1");
    if (!(delta > 0.0)) throw std::invalid_argument("n-gram smoothing delta must be positive");
    if (num_events < 2) throw std::invalid_argument("n-gram vocabulary needs at least one real event");
    std::size_t shortest = corpus.front().events.size();
    for (const auto& s : corpus) shortest = std::min(shortest, s.events.size());
    if (order > shortest) {
        throw std::invalid_argument("n-gram order " + std::to_string(order) + " exceeds the shortest sequence (" +
                                    std::to_string(shortest) + " events)");
    }

    NGramEstimator est;
    est.num_events_ = num_events;
    est.order_ = order;
    est.delta_ = delta;
    est.counts_.resize(order + 1);

    std::vector<std::uint64_t> positives(num_labels, 0);
    // present_with[e][j] / present_without[e][j]: sequences containing e with label j on / off.
    std::vector<std::vector<std::uint64_t>> present_with(num_events, std::vector<std::uint64_t>(num_labels, 0));
    std::vector<std::vector<std::uint64_t>> present_without = present_with;

    for (const auto& seq : corpus) {
        seq.validate(num_events, num_labels);
        const auto ids = seq.event_ids();
        for (std::size_t t = 1; t < ids.size(); ++t) {
            for (std::size_t h = 0; h <= order && h <= t; ++h) {
                std::vector<EventId> ctx(ids.begin() + static_cast<std::ptrdiff_t>(t - h), ids.begin() + static_cast<std::ptrdiff_t>(t));
                auto& row = est.counts_[h][ctx];
                ++row.total;
                ++row.counts[ids[t]];
            }
        }
        std::vector<std::uint8_t> present(num_events, 0);
        for (auto e : ids) present[e] = 1;
        for (std::size_t j = 0; j < num_labels; ++j) {
            if (seq.labels[j]) ++positives[j];
            for (EventId e = 1; e < num_events; ++e) {
                if (!present[e]) continue;
                if (seq.labels[j]) ++present_with[e][j];
                else ++present_without[e][j];
            }
        }
    }

    const double n = static_cast<double>(corpus.size());
    est.prior_log_odds_.resize(num_labels);
    est.evidence_ = Matrix(num_events, num_labels, 0.0);
    for (std::size_t j = 0; j < num_labels; ++j) {
        const double pos = static_cast<double>(positives[j]);
        const double neg = n - pos;
        est.prior_log_odds_[j] = std::log((pos + 1.0) / (neg + 1.0));
        for (EventId e = 1; e < num_events; ++e) {
            const double with = (static_cast<double>(present_with[e][j]) + 1.0) / (pos + 2.0);
            const double without = (static_cast<double>(present_without[e][j]) + 1.0) / (neg + 2.0);
            est.evidence_(e, j) = std::log(with / without);
        }
    }
    return est;
}

std::vector<double> NGramEstimator::next_event_dist(std::span<const EventId> prefix) const {
    if (prefix.empty()) throw std::invalid_argument("next_event_dist needs a non-empty prefix");
    for (auto e : prefix) {
        if (e >= num_events_) throw std::invalid_argument("unknown event id " + std::to_string(e));
    }
    const std::size_t real = num_events_ - 1;
    for (std::size_t h = std::min(order_, prefix.size());; --h) {
        std::vector<EventId> ctx(prefix.end() - static_cast<std::ptrdiff_t>(h), prefix.end());
        auto it = counts_[h].find(ctx);
        if (it != counts_[h].end()) {
            const auto& row = it->second;
            const double denom = static_cast<double>(row.total) + delta_ * static_cast<double>(real);
            std::vector<double> dist(num_events_, delta_ / denom);
            dist[kStartEvent] = 0.0;
            for (const auto& [e, c] : row.counts) dist[e] = (static_cast<double>(c) + delta_) / denom;
            return dist;
        }
        if (h == 0) break;
    }
    std::vector<double> uniform(num_events_, 1.0 / static_cast<double>(real));
    uniform[kStartEvent] = 0.0;
    return uniform;
}

Matrix NGramEstimator::label_posterior_path(std::span<const EventId> events, const QueryContext&) const {
    const std::size_t labels = prior_log_odds_.size();
    Matrix path(events.size(), labels);
    std::vector<double> log_odds = prior_log_odds_;
    std::vector<std::uint8_t> seen(num_events_, 0);
    for (std::size_t r = 0; r < events.size(); ++r) {
        const EventId e = events[r];
        if (e >= num_events_) throw std::invalid_argument("unknown event id " + std::to_string(e));
        if (e != kStartEvent && !seen[e]) {
            seen[e] = 1;
            for (std::size_t j = 0; j < labels; ++j) log_odds[j] += evidence_(e, j);
        }
        for (std::size_t j = 0; j < labels; ++j) path(r, j) = clamp_probability(sigmoid(log_odds[j]));
    }
    return path;
}

}  // namespace cargo
