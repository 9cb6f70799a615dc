#pragma once

// Synthetic multi-label event-sequence worlds: Markov-chain event dynamics
// plus boolean conjunction rules that define each label. The rule literals
// are the ground-truth Markov boundary of the label.

#include <cstdint>
#include <string>
#include <vector>

#include "cargo/types.hpp"

namespace cargo {

/// y = (all `positive` events occur) AND (no `negated` event occurs).
struct LabelRule {
    std::vector<EventId> positive;
    std::vector<EventId> negated;

    bool operator==(const LabelRule&) const = default;
};

struct GeneratorSpec {
    std::string name;
    std::size_t num_events = 0;  // real events, ids 1..num_events
    std::size_t length = 0;      // events per sequence including the start marker
    /// (num_events + 1) row-stochastic rows; row 0 is the start-marker row
    /// and column 0 is always zero.
    std::vector<std::vector<double>> transition;
    std::vector<LabelRule> rules;
    double zipf_exponent = 0.0;
    std::uint64_t seed = 0;

    std::size_t vocab_size() const { return num_events + 1; }
    std::size_t num_labels() const { return rules.size(); }
    Vocab event_vocab() const { return Vocab::events(num_events); }
    Vocab label_vocab() const { return Vocab::labels(rules.size()); }

    /// Throws std::invalid_argument on malformed rows or rules, including a
    /// rule that lists the same event as positive and negated.
    void validate() const;

    bool operator==(const GeneratorSpec&) const = default;
};

/// Label value of every rule over one event set (presence semantics).
std::vector<std::uint8_t> evaluate_rules(const GeneratorSpec& spec, const std::vector<EventId>& events);

/// Sorted union of positive and negated literals per label.
GroundTruth ground_truth(const GeneratorSpec& spec);

struct Corpus {
    std::vector<LabeledSequence> sequences;
    GroundTruth truth;
};

/// Samples m sequences with ids 0..m-1. Sequence k draws from a stream
/// derived from (spec.seed, k), so the output is independent of `workers`.
Corpus generate(const GeneratorSpec& spec, std::size_t m, std::size_t workers = 1);

/// "tiny", "standard" or "longtail"; throws std::invalid_argument otherwise.
GeneratorSpec preset(const std::string& name, std::uint64_t seed = 7);

}  // namespace cargo
