#pragma once

// Scoring recovered parent sets against ground-truth Markov boundaries, and
// criterion sweeps over corpus size.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cargo/estimator.hpp"
#include "cargo/fusion.hpp"
#include "cargo/oneshot.hpp"
#include "cargo/types.hpp"

namespace cargo {

struct LabelScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
    std::size_t predicted = 0;
    std::size_t truth = 0;
    std::size_t true_positives = 0;
};

struct Averages {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    std::vector<LabelScore> labels;
    Averages weighted;  // weights m_j
    Averages macro;     // plain mean over labels with m_j > 0
    std::uint64_t m = 0;
    double seconds = 0.0;  // wall-clock of the run that produced the graph, when known
};

/// Precision is 0 for an empty prediction against a non-empty truth and 1
/// when both are empty; recall is 1 for an empty truth; F1 is 0 when
/// P + R = 0. A graph with more labels than the truth throws.
EvalReport score(const GlobalGraph& graph, const GroundTruth& truth);

struct SweepRow {
    std::uint64_t m = 0;
    std::string criterion;
    EvalReport report;
};

/// Phase 1 on the first max(m_grid) sequences once, then for each m the
/// first m local graphs are tallied and fused under every criterion.
/// Returns |m_grid| x |criteria| rows, m-major.
std::vector<SweepRow> sweep(const ConditionalEstimator& estimator, std::span<const LabeledSequence> corpus,
                            const GroundTruth& truth, const OneShotConfig& config, std::uint64_t seed,
                            std::size_t workers, const std::vector<Criterion>& criteria,
                            const std::vector<std::uint64_t>& m_grid);

/// CSV with one row per SweepRow.
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& extra_column = {},
                      const std::string& extra_value = {});
std::string sweep_csv_header(const std::string& extra_column = {});

}  // namespace cargo
