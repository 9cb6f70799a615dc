#pragma once

#include <cstddef>
#include <vector>

#include "cargo/estimator.hpp"
#include "cargo/random.hpp"
#include "cargo/world.hpp"

namespace cargo {

/// Exact conditionals of a synthetic world. The next-event distribution is
/// the transition row of the last event; the label posterior is the
/// probability that the label's rule holds at the end of a sequence of
/// `spec.length` events given the prefix.
///
/// Posteriors come from a dynamic programme over (row class of the last
/// event, positive literals already seen, steps remaining); a negated literal
/// in the prefix pins the posterior to zero. Events with identical transition
/// rows share one row class, which keeps the tables small for block-structured
/// chains. Rules with more positive literals than `max_dp_literals`, or whose
/// table would exceed `max_table_entries`, use a seeded Monte-Carlo rollout
/// estimate instead (standard error <= 0.5 / sqrt(rollouts)).
class OracleEstimator final : public ConditionalEstimator {
public:
    struct Options {
        std::size_t max_dp_literals = 16;
        std::size_t max_table_entries = std::size_t{1} << 25;
        std::size_t rollouts = 4096;
    };

    explicit OracleEstimator(GeneratorSpec spec);
    OracleEstimator(GeneratorSpec spec, Options options);

    std::size_t num_events() const override { return spec_.vocab_size(); }
    std::size_t num_labels() const override { return spec_.num_labels(); }
    std::vector<double> next_event_dist(std::span<const EventId> prefix) const override;
    Matrix label_posterior_path(std::span<const EventId> events, const QueryContext& ctx = {}) const override;

    /// Unclamped P(rule j holds at the end | prefix) with `steps_remaining`
    /// further events to come.
    double rule_probability(LabelId label, std::span<const EventId> prefix, std::size_t steps_remaining) const;

    bool is_exact(LabelId label) const { return labels_.at(label).exact; }
    std::size_t num_row_classes() const { return class_rep_.size(); }
    const GeneratorSpec& spec() const { return spec_; }

private:
    struct Transition {
        std::size_t target_class;
        int literal;  // index into the rule's positive literals, -1 if none
        double weight;
    };
    struct LabelModel {
        bool exact = false;
        std::size_t num_positive = 0;
        std::vector<int> literal_index;   // per event id, -1 if not a positive literal
        std::vector<std::uint8_t> forbidden;  // per event id
        std::size_t max_steps = 0;
        std::vector<double> table;  // [(steps * masks + mask) * classes + class]
    };

    void build_table(LabelModel& model) const;
    double table_value(const LabelModel& model, std::size_t row_class, std::uint64_t mask, std::size_t steps) const;
    double rollout(LabelId label, EventId last, const std::vector<std::uint8_t>& seen, std::size_t steps) const;

    GeneratorSpec spec_;
    Options options_;
    std::vector<std::size_t> row_class_;  // per event id
    std::vector<EventId> class_rep_;
    std::vector<CategoricalSampler> samplers_;
    std::vector<LabelModel> labels_;
};

/// Exact label posteriors for a world given a prefix and an explicit number
/// of remaining steps (unclamped).
std::vector<double> oracle_label_posterior(const GeneratorSpec& spec, std::span<const EventId> prefix,
                                           std::size_t steps_remaining);

}  // namespace cargo
