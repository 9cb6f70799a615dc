#include "cargo/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cargo/parallel.hpp"
#include "cargo/random.hpp"

namespace cargo {

void GeneratorSpec::validate() const {
    if (num_events == 0) throw std::invalid_argument("world needs at least one event");
    if (length < 2) throw std::invalid_argument("sequence length must be at least 2");
    if (transition.size() != vocab_size()) throw std::invalid_argument("transition matrix needs one row per event id");
    for (std::size_t r = 0; r < transition.size(); ++r) {
        const auto& row = transition[r];
        if (row.size() != vocab_size()) throw std::invalid_argument("transition row " + std::to_string(r) + " has wrong width");
        if (row[kStartEvent] != 0.0) throw std::invalid_argument("transition row " + std::to_string(r) + " re-emits the start marker");
        double sum = 0.0;
        for (double p : row) {
            if (!(p >= 0.0)) throw std::invalid_argument("negative transition probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("transition row " + std::to_string(r) + " does not sum to 1");
    }
    for (std::size_t j = 0; j < rules.size(); ++j) {
        const auto& rule = rules[j];
        const std::string where = "rule for label " + std::to_string(j) + ": ";
        if (rule.positive.empty()) throw std::invalid_argument(where + "needs at least one positive literal");
        std::set<EventId> pos;
        for (auto e : rule.positive) {
            if (e == kStartEvent || e > num_events) throw std::invalid_argument(where + "unknown event id " + std::to_string(e));
            if (!pos.insert(e).second) throw std::invalid_argument(where + "duplicate literal");
        }
        std::set<EventId> neg;
        for (auto e : rule.negated) {
            if (e == kStartEvent || e > num_events) throw std::invalid_argument(where + "unknown event id " + std::to_string(e));
            if (pos.count(e)) throw std::invalid_argument(where + "event " + std::to_string(e) + " is both required and forbidden");
            if (!neg.insert(e).second) throw std::invalid_argument(where + "duplicate literal");
        }
    }
}

std::vector<std::uint8_t> evaluate_rules(const GeneratorSpec& spec, const std::vector<EventId>& events) {
    std::vector<std::uint8_t> present(spec.vocab_size(), 0);
    for (auto e : events) present.at(e) = 1;
    std::vector<std::uint8_t> labels(spec.rules.size(), 0);
    for (std::size_t j = 0; j < spec.rules.size(); ++j) {
        const auto& rule = spec.rules[j];
        bool holds = std::all_of(rule.positive.begin(), rule.positive.end(), [&](EventId e) { return present[e] != 0; });
        holds = holds && std::none_of(rule.negated.begin(), rule.negated.end(), [&](EventId e) { return present[e] != 0; });
        labels[j] = holds ? 1 : 0;
    }
    return labels;
}

GroundTruth ground_truth(const GeneratorSpec& spec) {
    GroundTruth truth;
    truth.reserve(spec.rules.size());
    for (const auto& rule : spec.rules) {
        std::vector<EventId> members = rule.positive;
        members.insert(members.end(), rule.negated.begin(), rule.negated.end());
        std::sort(members.begin(), members.end());
        truth.push_back(std::move(members));
    }
    return truth;
}

Corpus generate(const GeneratorSpec& spec, std::size_t m, std::size_t workers) {
    if (m < 1) throw std::invalid_argument("generate needs m >= 1");
    spec.validate();
    std::vector<CategoricalSampler> rows;
    rows.reserve(spec.transition.size());
    for (const auto& row : spec.transition) rows.emplace_back(row);

    Corpus corpus;
    corpus.truth = ground_truth(spec);
    corpus.sequences.resize(m);
    parallel_for(m, workers, [&](std::size_t k) {
        Rng rng(derive_seed({spec.seed, 0x67656eULL, k}));
        std::exponential_distribution<double> gap(1.0);
        LabeledSequence seq;
        seq.id = k;
        seq.events.reserve(spec.length);
        seq.events.push_back({kStartEvent, 0.0});
        std::vector<EventId> ids{kStartEvent};
        double t = 0.0;
        EventId prev = kStartEvent;
        for (std::size_t i = 1; i < spec.length; ++i) {
            prev = static_cast<EventId>(rows[prev](rng));
            t += gap(rng);
            seq.events.push_back({prev, t});
            ids.push_back(prev);
        }
        seq.labels = evaluate_rules(spec, ids);
        corpus.sequences[k] = std::move(seq);
    });
    return corpus;
}

namespace {

GeneratorSpec tiny_world(std::uint64_t seed) {
    GeneratorSpec spec;
    spec.name = "tiny";
    spec.num_events = 4;
    spec.length = 6;
    spec.transition = {
        {0.0, 0.40, 0.30, 0.20, 0.10},
        {0.0, 0.10, 0.40, 0.30, 0.20},
        {0.0, 0.30, 0.10, 0.30, 0.30},
        {0.0, 0.25, 0.25, 0.25, 0.25},
        {0.0, 0.50, 0.20, 0.10, 0.20},
    };
    spec.rules = {LabelRule{{1}, {3}}};
    spec.seed = seed;
    return spec;
}

// 200 events split into a shared literal pool, one trigger event per label
// and a background block. Rows depend only on the regime of the previous
// event, so the chain has few distinct rows.
GeneratorSpec chain_world(const std::string& name, double zipf, std::uint64_t seed) {
    constexpr std::size_t kEvents = 200;
    constexpr std::size_t kLabels = 20;
    constexpr std::size_t kShared = 16;
    constexpr std::size_t kRegimes = 8;
    constexpr double kSharedMass = 0.018;
    constexpr double kTriggerRate = 0.0125;  // per step, head label
    constexpr double kRegimeDrift = 0.3;

    const EventId first_trigger = kShared + 1;
    const EventId first_background = first_trigger + kLabels;
    const std::size_t background = kEvents - kShared - kLabels;

    std::vector<double> base(kEvents + 1, 0.0);
    for (EventId e = 1; e <= kShared; ++e) base[e] = kSharedMass;
    for (std::size_t j = 0; j < kLabels; ++j) {
        base[first_trigger + j] = kTriggerRate * std::pow(static_cast<double>(j + 1), -zipf);
    }
    const double used = std::accumulate(base.begin(), base.end(), 0.0);
    for (EventId e = first_background; e <= kEvents; ++e) base[e] = (1.0 - used) / static_cast<double>(background);

    auto regime = [](EventId e) { return static_cast<std::size_t>(e - 1) % kRegimes; };
    auto normalise = [](std::vector<double>& row) {
        const double s = std::accumulate(row.begin(), row.end(), 0.0);
        for (auto& p : row) p /= s;
        // Fold the rounding residue into the largest entry so the row sums to 1.
        const double residue = 1.0 - std::accumulate(row.begin(), row.end(), 0.0);
        *std::max_element(row.begin(), row.end()) += residue;
    };

    GeneratorSpec spec;
    spec.name = name;
    spec.num_events = kEvents;
    spec.length = 50;
    spec.zipf_exponent = zipf;
    spec.seed = seed;
    spec.transition.assign(kEvents + 1, {});
    spec.transition[kStartEvent] = base;
    normalise(spec.transition[kStartEvent]);
    std::vector<std::vector<double>> regime_rows(kRegimes);
    for (std::size_t r = 0; r < kRegimes; ++r) {
        std::vector<double> boost(kEvents + 1, 0.0);
        for (EventId e = 1; e <= kEvents; ++e) {
            if (regime(e) == (r + 1) % kRegimes) boost[e] = base[e];
        }
        const double bsum = std::accumulate(boost.begin(), boost.end(), 0.0);
        std::vector<double> row(kEvents + 1, 0.0);
        for (EventId e = 1; e <= kEvents; ++e) row[e] = (1.0 - kRegimeDrift) * base[e] + kRegimeDrift * boost[e] / bsum;
        normalise(row);
        regime_rows[r] = std::move(row);
    }
    for (EventId e = 1; e <= kEvents; ++e) spec.transition[e] = regime_rows[regime(e)];

    // Rule structure is fixed by the preset, not by the sampling seed, and
    // shared by standard and longtail.
    Rng rng(derive_seed({0x72756c6573ULL, 0}));
    for (std::size_t j = 0; j < kLabels; ++j) {
        const std::size_t literals = 5 + static_cast<std::size_t>(std::lround(3.0 * static_cast<double>(j) / (kLabels - 1)));
        const std::size_t negated = (j % 10 == 7) ? 1 : 0;
        LabelRule rule;
        rule.positive.push_back(first_trigger + static_cast<EventId>(j));
        std::vector<EventId> pool(kShared);
        std::iota(pool.begin(), pool.end(), EventId{1});
        std::shuffle(pool.begin(), pool.end(), rng);
        for (std::size_t k = 0; k + 1 + negated < literals; ++k) rule.positive.push_back(pool[k]);
        if (negated) {
            rule.negated.push_back(first_background + static_cast<EventId>(rng() % background));
        }
        std::sort(rule.positive.begin(), rule.positive.end());
        spec.rules.push_back(std::move(rule));
    }
    return spec;
}

}  // namespace

GeneratorSpec preset(const std::string& name, std::uint64_t seed) {
    GeneratorSpec spec;
    if (name == "tiny") {
        spec = tiny_world(seed);
    } else if (name == "standard") {
        spec = chain_world(name, 0.0, seed);
    } else if (name == "longtail") {
        spec = chain_world(name, 1.2, seed);
    } else {
        throw std::invalid_argument("unknown preset '" + name + "' (expected tiny, standard or longtail)");
    }
    spec.validate();
    return spec;
}

}  // namespace cargo
