#include "cargo/oracle_estimator.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "cargo/info.hpp"

namespace cargo {

OracleEstimator::OracleEstimator(GeneratorSpec spec) : OracleEstimator(std::move(spec), Options{}) {}

OracleEstimator::OracleEstimator(GeneratorSpec spec, Options options) : spec_(std::move(spec)), options_(options) {
    spec_.validate();
    const std::size_t vocab = spec_.vocab_size();

    std::map<std::vector<double>, std::size_t> classes;
    row_class_.resize(vocab);
    for (EventId e = 0; e < vocab; ++e) {
        auto [it, inserted] = classes.emplace(spec_.transition[e], class_rep_.size());
        if (inserted) class_rep_.push_back(e);
        row_class_[e] = it->second;
    }
    samplers_.reserve(vocab);
    for (const auto& row : spec_.transition) samplers_.emplace_back(row);

    labels_.resize(spec_.num_labels());
    for (std::size_t j = 0; j < labels_.size(); ++j) {
        auto& model = labels_[j];
        const auto& rule = spec_.rules[j];
        model.num_positive = rule.positive.size();
        model.literal_index.assign(vocab, -1);
        model.forbidden.assign(vocab, 0);
        for (std::size_t k = 0; k < rule.positive.size(); ++k) model.literal_index[rule.positive[k]] = static_cast<int>(k);
        for (auto e : rule.negated) model.forbidden[e] = 1;
        model.max_steps = spec_.length - 1;
        const std::size_t masks = model.num_positive < 64 ? (std::size_t{1} << model.num_positive) : 0;
        const bool fits = model.num_positive <= options_.max_dp_literals && masks != 0 &&
                          (model.max_steps + 1) * masks * class_rep_.size() <= options_.max_table_entries;
        model.exact = fits;
        if (fits) build_table(model);
    }
}

void OracleEstimator::build_table(LabelModel& model) const {
    const std::size_t classes = class_rep_.size();
    const std::size_t masks = std::size_t{1} << model.num_positive;
    const std::uint64_t full = masks - 1;

    // Aggregate each class's row by (target class, literal), dropping
    // forbidden targets: they contribute probability zero.
    std::vector<std::vector<Transition>> moves(classes);
    for (std::size_t k = 0; k < classes; ++k) {
        std::map<std::pair<std::size_t, int>, double> grouped;
        const auto& row = spec_.transition[class_rep_[k]];
        for (EventId e = 0; e < row.size(); ++e) {
            if (row[e] == 0.0 || model.forbidden[e]) continue;
            grouped[{row_class_[e], model.literal_index[e]}] += row[e];
        }
        for (const auto& [key, w] : grouped) moves[k].push_back({key.first, key.second, w});
    }

    model.table.assign((model.max_steps + 1) * masks * classes, 0.0);
    auto at = [&](std::size_t s, std::uint64_t mask, std::size_t k) -> double& {
        return model.table[(s * masks + mask) * classes + k];
    };
    for (std::size_t k = 0; k < classes; ++k) at(0, full, k) = 1.0;
    for (std::size_t s = 1; s <= model.max_steps; ++s) {
        for (std::uint64_t mask = 0; mask < masks; ++mask) {
            for (std::size_t k = 0; k < classes; ++k) {
                double v = 0.0;
                for (const auto& t : moves[k]) {
                    const std::uint64_t next = t.literal < 0 ? mask : (mask | (std::uint64_t{1} << t.literal));
                    v += t.weight * at(s - 1, next, t.target_class);
                }
                at(s, mask, k) = v;
            }
        }
    }
}

double OracleEstimator::table_value(const LabelModel& model, std::size_t row_class, std::uint64_t mask, std::size_t steps) const {
    const std::size_t classes = class_rep_.size();
    const std::size_t masks = std::size_t{1} << model.num_positive;
    return model.table[(steps * masks + mask) * classes + row_class];
}

double OracleEstimator::rollout(LabelId label, EventId last, const std::vector<std::uint8_t>& seen, std::size_t steps) const {
    const auto& model = labels_[label];
    std::uint64_t seen_hash = 0;
    std::size_t missing = 0;
    for (std::size_t k = 0; k < seen.size(); ++k) {
        if (seen[k]) seen_hash = mix64(seen_hash ^ (k + 1));
        else ++missing;
    }
    if (steps == 0) return missing == 0 ? 1.0 : 0.0;
    Rng rng(derive_seed({0x726f6c6cULL, label, last, steps, seen_hash}));
    std::size_t hits = 0;
    std::vector<std::uint8_t> local;
    for (std::size_t n = 0; n < options_.rollouts; ++n) {
        local = seen;
        std::size_t left = missing;
        EventId cur = last;
        bool ok = true;
        for (std::size_t s = 0; s < steps; ++s) {
            cur = static_cast<EventId>(samplers_[cur](rng));
            if (model.forbidden[cur]) {
                ok = false;
                break;
            }
            const int lit = model.literal_index[cur];
            if (lit >= 0 && !local[lit]) {
                local[lit] = 1;
                --left;
            }
        }
        if (ok && left == 0) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(options_.rollouts);
}

double OracleEstimator::rule_probability(LabelId label, std::span<const EventId> prefix, std::size_t steps_remaining) const {
    if (prefix.empty() || prefix.front() != kStartEvent) throw std::invalid_argument("prefix must begin with the start marker");
    const auto& model = labels_.at(label);
    std::vector<std::uint8_t> seen(model.num_positive, 0);
    std::uint64_t mask = 0;
    for (auto e : prefix) {
        if (e >= spec_.vocab_size()) throw std::invalid_argument("unknown event id " + std::to_string(e));
        if (model.forbidden[e]) return 0.0;
        const int lit = model.literal_index[e];
        if (lit >= 0) {
            seen[lit] = 1;
            if (lit < 64) mask |= std::uint64_t{1} << lit;
        }
    }
    if (model.exact && steps_remaining <= model.max_steps) {
        return table_value(model, row_class_[prefix.back()], mask, steps_remaining);
    }
    return rollout(label, prefix.back(), seen, steps_remaining);
}

std::vector<double> OracleEstimator::next_event_dist(std::span<const EventId> prefix) const {
    if (prefix.empty()) throw std::invalid_argument("next_event_dist needs a non-empty prefix");
    const EventId last = prefix.back();
    if (last >= spec_.vocab_size()) throw std::invalid_argument("unknown event id " + std::to_string(last));
    return spec_.transition[last];
}

Matrix OracleEstimator::label_posterior_path(std::span<const EventId> events, const QueryContext&) const {
    if (events.empty() || events.front() != kStartEvent) throw std::invalid_argument("prefix must begin with the start marker");
    const std::size_t labels = labels_.size();
    Matrix path(events.size(), labels);
    std::vector<std::uint64_t> masks(labels, 0);
    std::vector<std::uint8_t> violated(labels, 0);
    std::vector<std::vector<std::uint8_t>> seen(labels);
    for (std::size_t j = 0; j < labels; ++j) seen[j].assign(labels_[j].num_positive, 0);

    for (std::size_t r = 0; r < events.size(); ++r) {
        const EventId e = events[r];
        if (e >= spec_.vocab_size()) throw std::invalid_argument("unknown event id " + std::to_string(e));
        const std::size_t consumed = r + 1;
        const std::size_t steps = consumed >= spec_.length ? 0 : spec_.length - consumed;
        for (std::size_t j = 0; j < labels; ++j) {
            const auto& model = labels_[j];
            if (model.forbidden[e]) violated[j] = 1;
            const int lit = model.literal_index[e];
            if (lit >= 0) {
                seen[j][lit] = 1;
                if (lit < 64) masks[j] |= std::uint64_t{1} << lit;
            }
            double p = 0.0;
            if (!violated[j]) {
                p = model.exact ? table_value(model, row_class_[e], masks[j], steps) : rollout(static_cast<LabelId>(j), e, seen[j], steps);
            }
            path(r, j) = clamp_probability(p);
        }
    }
    return path;
}

std::vector<double> oracle_label_posterior(const GeneratorSpec& spec, std::span<const EventId> prefix, std::size_t steps_remaining) {
    GeneratorSpec horizon = spec;
    horizon.length = std::max(spec.length, prefix.size() + steps_remaining);
    const OracleEstimator oracle(std::move(horizon));
    std::vector<double> out(spec.num_labels());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = oracle.rule_probability(static_cast<LabelId>(j), prefix, steps_remaining);
    return out;
}

}  // namespace cargo
