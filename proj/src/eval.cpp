#include "cargo/eval.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace cargo {

EvalReport score(const GlobalGraph& graph, const GroundTruth& truth) {
    if (graph.num_labels() > truth.size()) {
        throw std::invalid_argument("graph has " + std::to_string(graph.num_labels()) + " labels but the ground truth only " +
                                    std::to_string(truth.size()));
    }
    EvalReport report;
    report.labels.resize(graph.num_labels());
    double weight_sum = 0.0;
    std::size_t scored = 0;
    for (LabelId j = 0; j < graph.num_labels(); ++j) {
        auto predicted = graph.parent_ids(j);
        std::sort(predicted.begin(), predicted.end());
        predicted.erase(std::unique(predicted.begin(), predicted.end()), predicted.end());
        auto expected = truth[j];
        std::sort(expected.begin(), expected.end());
        expected.erase(std::unique(expected.begin(), expected.end()), expected.end());
        std::vector<EventId> hit;
        std::set_intersection(predicted.begin(), predicted.end(), expected.begin(), expected.end(), std::back_inserter(hit));

        LabelScore& s = report.labels[j];
        s.support = graph.support[j];
        s.predicted = predicted.size();
        s.truth = expected.size();
        s.true_positives = hit.size();
        const double tp = static_cast<double>(hit.size());
        if (predicted.empty()) s.precision = expected.empty() ? 1.0 : 0.0;
        else s.precision = tp / static_cast<double>(predicted.size());
        s.recall = expected.empty() ? 1.0 : tp / static_cast<double>(expected.size());
        s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;

        if (s.support == 0) continue;
        const double w = static_cast<double>(s.support);
        weight_sum += w;
        report.weighted.precision += w * s.precision;
        report.weighted.recall += w * s.recall;
        report.weighted.f1 += w * s.f1;
        report.macro.precision += s.precision;
        report.macro.recall += s.recall;
        report.macro.f1 += s.f1;
        ++scored;
    }
    if (weight_sum > 0.0) {
        report.weighted.precision /= weight_sum;
        report.weighted.recall /= weight_sum;
        report.weighted.f1 /= weight_sum;
    }
    if (scored > 0) {
        const double n = static_cast<double>(scored);
        report.macro.precision /= n;
        report.macro.recall /= n;
        report.macro.f1 /= n;
    }
    return report;
}

std::vector<SweepRow> sweep(const ConditionalEstimator& estimator, std::span<const LabeledSequence> corpus,
                            const GroundTruth& truth, const OneShotConfig& config, std::uint64_t seed,
                            std::size_t workers, const std::vector<Criterion>& criteria,
                            const std::vector<std::uint64_t>& m_grid) {
    if (m_grid.empty()) return {};
    const auto m_max = *std::max_element(m_grid.begin(), m_grid.end());
    if (m_max > corpus.size()) {
        throw std::invalid_argument("sweep needs " + std::to_string(m_max) + " sequences, corpus has " +
                                    std::to_string(corpus.size()));
    }
    const auto used = corpus.first(m_max);
    const auto marginals = label_marginals(used, estimator.num_labels());
    const auto t0 = std::chrono::steady_clock::now();
    const DiscoveryResult discovered = discover_batch(estimator, used, config, seed, workers, marginals);
    const double phase1 = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<SweepRow> rows;
    for (const auto m : m_grid) {
        std::unordered_set<SequenceId> ids;
        for (std::size_t k = 0; k < m; ++k) ids.insert(corpus[k].id);
        std::vector<LocalGraph> graphs;
        for (const auto& g : discovered.graphs) {
            if (ids.count(g.sequence_id)) graphs.push_back(g);
        }
        const EdgeTally t = tally(graphs, corpus.first(m), estimator.num_labels());
        for (const auto& criterion : criteria) {
            const auto c0 = std::chrono::steady_clock::now();
            const GlobalGraph g = fuse(t, criterion);
            SweepRow row{m, criterion.label(), score(g, truth)};
            row.report.m = m;
            row.report.seconds = phase1 * static_cast<double>(m) / static_cast<double>(m_max) +
                                 std::chrono::duration<double>(std::chrono::steady_clock::now() - c0).count();
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string sweep_csv_header(const std::string& extra_column) {
    std::string h = extra_column.empty() ? "" : extra_column + ",";
    return h + "m,criterion,weighted_precision,weighted_recall,weighted_f1,macro_precision,macro_recall,macro_f1\n";
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& extra_column, const std::string& extra_value) {
    std::ostringstream os;
    os.precision(6);
    for (const auto& r : rows) {
        if (!extra_column.empty()) os << extra_value << ',';
        const auto& w = r.report.weighted;
        const auto& a = r.report.macro;
        os << r.m << ',' << r.criterion << ',' << w.precision << ',' << w.recall << ',' << w.f1 << ',' << a.precision << ','
           << a.recall << ',' << a.f1 << '\n';
    }
    return os.str();
}

}  // namespace cargo
