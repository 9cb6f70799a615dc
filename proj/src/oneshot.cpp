#include "cargo/oneshot.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

#include "cargo/info.hpp"
#include "cargo/parallel.hpp"

namespace cargo {

void OneShotConfig::validate() const {
    if (context < 1) throw std::invalid_argument("context must be at least 1");
    if (context >= max_len) throw std::invalid_argument("context must be smaller than max_len");
    if (samples < 1) throw std::invalid_argument("samples must be at least 1");
    if (top_k < 1) throw std::invalid_argument("top_k must be at least 1");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("top_p must lie in (0, 1]");
    if (!(threshold_k >= 0.0)) throw std::invalid_argument("threshold_k must be non-negative");
    if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("eps must lie in (0, 0.5)");
}

std::vector<std::pair<EventId, double>> top_k_top_p_filter(std::span<const double> dist, std::size_t top_k, double top_p) {
    std::vector<EventId> order(dist.size());
    std::iota(order.begin(), order.end(), EventId{0});
    const std::size_t k = std::min(top_k, dist.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), [&](EventId a, EventId b) {
        return dist[a] != dist[b] ? dist[a] > dist[b] : a < b;
    });
    std::vector<std::pair<EventId, double>> kept;
    double cumulative = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
        cumulative += dist[order[r]];
        if (r > 0 && cumulative > top_p) break;
        if (dist[order[r]] > 0.0 || r == 0) kept.emplace_back(order[r], dist[order[r]]);
    }
    double total = 0.0;
    for (const auto& kv : kept) total += kv.second;
    if (total > 0.0) {
        for (auto& kv : kept) kv.second /= total;
    } else {
        kept.resize(1);
        kept.front().second = 1.0;
    }
    return kept;
}

std::vector<std::vector<EventId>> sample_prefixes(const ConditionalEstimator& estimator, std::span<const EventId> events,
                                                  const OneShotConfig& config, Rng& rng) {
    if (events.size() <= config.context) throw std::invalid_argument("sequence must be longer than the context");
    struct Slot {
        std::vector<EventId> tokens;
        CategoricalSampler sampler;
    };
    std::vector<Slot> slots;
    for (std::size_t t = 1; t < config.context; ++t) {
        const auto dist = estimator.next_event_dist(events.first(t));
        const auto kept = top_k_top_p_filter(dist, config.top_k, config.top_p);
        Slot slot;
        std::vector<double> weights;
        for (const auto& [e, p] : kept) {
            slot.tokens.push_back(e);
            weights.push_back(p);
        }
        slot.sampler = CategoricalSampler(weights);
        slots.push_back(std::move(slot));
    }
    std::vector<std::vector<EventId>> variants(config.samples, std::vector<EventId>(events.begin(), events.end()));
    for (auto& v : variants) {
        v[0] = kStartEvent;
        for (std::size_t t = 1; t < config.context; ++t) {
            const auto& slot = slots[t - 1];
            v[t] = slot.tokens[slot.sampler(rng)];
        }
    }
    return variants;
}

CmiMatrix cmi_profile(const ConditionalEstimator& estimator, const std::vector<std::vector<EventId>>& variants,
                      const OneShotConfig& config, const QueryContext& ctx, std::span<const double> label_marginals) {
    CmiMatrix out;
    out.first_position = config.context;
    out.labels = estimator.num_labels();
    if (variants.empty()) return out;
    const std::size_t length = std::min(variants.front().size(), config.max_len);
    if (length < config.context + 2) {
        spdlog::warn("cmi_profile: sequence of {} events is shorter than context + 2 = {}", length, config.context + 2);
        return out;
    }
    if (!label_marginals.empty() && label_marginals.size() != out.labels) {
        throw std::invalid_argument("label marginals do not match the label vocabulary");
    }
    const std::size_t positions = length - 1 - config.context;
    const std::size_t labels = out.labels;
    const std::size_t n = variants.size();
    out.positions = positions;
    out.cmi = Matrix(positions, labels, 0.0);
    out.cs_mean = Matrix(positions, labels, 0.0);
    out.cs_std = Matrix(positions, labels, 0.0);
    out.ig_z = Matrix(positions, labels, 0.0);

    // cs[v][position][label]
    std::vector<Matrix> cs(n, Matrix(positions, labels, 0.0));
    for (std::size_t v = 0; v < n; ++v) {
        if (variants[v].size() < length) throw std::invalid_argument("variants must share one length");
        const Matrix path = estimator.label_posterior_path(std::span<const EventId>(variants[v]).first(length), ctx);
        for (std::size_t i = 0; i < positions; ++i) {
            const std::size_t col = config.context + i;
            for (std::size_t j = 0; j < labels; ++j) {
                const double p0 = clamp_probability(path(col, j), config.eps);
                const double p1 = clamp_probability(path(col + 1, j), config.eps);
                out.cmi(i, j) += binary_kl(p1, p0);
                cs[v](i, j) = p1 - p0;
                out.cs_mean(i, j) += p1 - p0;
                if (!label_marginals.empty()) {
                    out.ig_z(i, j) += binary_kl(p0, clamp_probability(label_marginals[j], config.eps));
                }
            }
        }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < positions; ++i) {
        for (std::size_t j = 0; j < labels; ++j) {
            out.cmi(i, j) *= inv_n;
            out.cs_mean(i, j) *= inv_n;
            out.ig_z(i, j) *= inv_n;
            if (n > 1) {
                double ss = 0.0;
                for (std::size_t v = 0; v < n; ++v) {
                    const double d = cs[v](i, j) - out.cs_mean(i, j);
                    ss += d * d;
                }
                out.cs_std(i, j) = std::sqrt(ss / static_cast<double>(n - 1));
            }
        }
    }
    return out;
}

Detections dynamic_threshold(const CmiMatrix& matrix, double threshold_k) {
    if (matrix.empty()) throw std::invalid_argument("dynamic_threshold needs a non-empty matrix");
    Detections det;
    det.threshold.resize(matrix.labels);
    det.mask.assign(matrix.positions, std::vector<std::uint8_t>(matrix.labels, 0));
    std::vector<double> column(matrix.positions);
    for (std::size_t j = 0; j < matrix.labels; ++j) {
        for (std::size_t i = 0; i < matrix.positions; ++i) column[i] = matrix.cmi(i, j);
        const double mu = mean_of(column);
        const double sigma = sample_stddev(column, mu);
        det.threshold[j] = mu + threshold_k * sigma;
        for (std::size_t i = 0; i < matrix.positions; ++i) det.mask[i][j] = column[i] >= det.threshold[j] ? 1 : 0;
    }
    return det;
}

namespace {

LocalGraph empty_graph(const LabeledSequence& sequence, std::size_t labels) {
    LocalGraph g;
    g.sequence_id = sequence.id;
    g.positive_labels = sequence.positive_labels();
    g.edges.resize(labels);
    return g;
}

}  // namespace

LocalGraph discover_sequence(const ConditionalEstimator& estimator, const LabeledSequence& sequence,
                             const OneShotConfig& config, std::uint64_t seed, std::span<const double> label_marginals) {
    config.validate();
    const std::size_t labels = estimator.num_labels();
    LocalGraph graph = empty_graph(sequence, labels);
    auto events = sequence.event_ids();
    if (events.size() > config.max_len) events.resize(config.max_len);
    if (events.size() < config.context + 2) {
        spdlog::warn("sequence {} skipped: {} events, need at least {}", sequence.id, events.size(), config.context + 2);
        return graph;
    }

    Rng rng(derive_seed({seed, 0x6f6e6573686f74ULL, sequence.id}));
    const auto variants = sample_prefixes(estimator, events, config, rng);
    const QueryContext ctx{sequence.id};
    const CmiMatrix matrix = cmi_profile(estimator, variants, config, ctx, label_marginals);
    const Detections det = dynamic_threshold(matrix, config.threshold_k);

    for (std::size_t j = 0; j < labels; ++j) {
        std::map<EventId, LocalEdge> best;
        for (std::size_t i = 0; i < matrix.positions; ++i) {
            const double cmi = matrix.cmi(i, j);
            if (!det.mask[i][j] || !(cmi > 0.0)) continue;
            const std::size_t position = matrix.first_position + i;
            LocalEdge edge{events[position + 1], position, cmi, matrix.cs_mean(i, j), matrix.cs_std(i, j), matrix.ig_z(i, j)};
            auto [it, inserted] = best.emplace(edge.event, edge);
            if (!inserted && cmi > it->second.cmi) it->second = edge;
        }
        auto& out = graph.edges[j];
        for (const auto& kv : best) out.push_back(kv.second);
        std::sort(out.begin(), out.end(), [](const LocalEdge& a, const LocalEdge& b) { return a.position < b.position; });
    }
    return graph;
}

DiscoveryResult discover_batch(const ConditionalEstimator& estimator, std::span<const LabeledSequence> sequences,
                               const OneShotConfig& config, std::uint64_t seed, std::size_t workers,
                               std::span<const double> label_marginals) {
    config.validate();
    const std::size_t need = config.context + 2;
    std::vector<std::size_t> todo;
    DiscoveryResult result;
    for (std::size_t k = 0; k < sequences.size(); ++k) {
        if (std::min(sequences[k].events.size(), config.max_len) >= need) todo.push_back(k);
        else ++result.skipped;
    }
    if (result.skipped > 0) {
        spdlog::warn("discover: skipped {} sequence(s) shorter than context + 2 = {}", result.skipped, need);
    }
    result.graphs.resize(todo.size());
    parallel_for(todo.size(), workers, [&](std::size_t t) {
        result.graphs[t] = discover_sequence(estimator, sequences[todo[t]], config, seed, label_marginals);
    });
    return result;
}

std::vector<double> label_marginals(std::span<const LabeledSequence> sequences, std::size_t num_labels) {
    std::vector<double> marginal(num_labels, 0.0);
    if (sequences.empty()) return marginal;
    for (const auto& s : sequences) {
        for (std::size_t j = 0; j < num_labels && j < s.labels.size(); ++j) marginal[j] += s.labels[j];
    }
    for (auto& m : marginal) m /= static_cast<double>(sequences.size());
    return marginal;
}

}  // namespace cargo
