#pragma once

// Phase 2: fold local graphs into per-edge detection counts and turn them
// into one global graph under a choice of inclusion criteria.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cargo/types.hpp"

namespace cargo {

struct EdgeCounts {
    std::uint64_t count = 0;     // k_ij
    std::vector<double> mi;      // one cmi + I(Y_j, Z) value per detection

    /// Mean of `mi`, summed in sorted order so merges in any order agree bit for bit.
    double mean_mi() const;
};

/// Detection counts per (label, event). Only sequences in which the label is
/// positive contribute, so k_ij <= m_j always holds.
class EdgeTally {
public:
    EdgeTally() = default;
    explicit EdgeTally(std::size_t num_labels) : support_(num_labels, 0), edges_(num_labels) {}

    std::size_t num_labels() const { return support_.size(); }
    std::uint64_t support(LabelId j) const { return support_.at(j); }
    const std::vector<std::uint64_t>& supports() const { return support_; }
    std::uint64_t total() const { return total_; }  // processed sequences, positive or not
    const std::map<EventId, EdgeCounts>& edges(LabelId j) const { return edges_.at(j); }
    double frequency(LabelId j, EventId e) const;

    /// Adds one processed sequence. `positive` holds its positive label ids.
    void add(const LocalGraph& graph, std::span<const LabelId> positive);
    void add(const LocalGraph& graph) { add(graph, graph.positive_labels); }
    void merge(const EdgeTally& other);

    /// Equal counts and equal multisets of MI samples.
    bool same_as(const EdgeTally& other) const;

private:
    std::vector<std::uint64_t> support_;
    std::vector<std::map<EventId, EdgeCounts>> edges_;
    std::uint64_t total_ = 0;
};

/// Tally using the labels stored in each local graph.
EdgeTally tally(std::span<const LocalGraph> graphs, std::size_t num_labels);
/// Tally using the labels of the matching sequence; a graph whose sequence id
/// is not in `sequences` throws std::invalid_argument.
EdgeTally tally(std::span<const LocalGraph> graphs, std::span<const LabeledSequence> sequences, std::size_t num_labels);

/// Logistic decay of the inclusion threshold with label support:
/// tau(m) = (tau_max - tau_min) / (1 + exp(k (ln m - ln m0))) + tau_min,
/// with m0 the median support and k = 2 ln 3 / (ln q75 - ln q25).
struct AdaptiveThreshold {
    double tau_max = 0.5;
    double tau_min = 0.05;
    double m0 = 1.0;
    double k = 1.0;

    /// Quantiles by linear interpolation over the positive supports. k falls
    /// back to 1 when q75 == q25. Throws when no support is positive.
    static AdaptiveThreshold fit(std::span<const std::uint64_t> supports, double tau_max = 0.5, double tau_min = 0.05);
    double operator()(double m) const;
};

/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
double quantile_linear(std::vector<double> values, double q);

/// Two-component Beta mixture on (0, 1).
struct BetaMixture {
    double weight[2] = {0.5, 0.5};
    double a[2] = {1.0, 1.0};
    double b[2] = {1.0, 1.0};
    int iterations = 0;
    double log_likelihood = 0.0;

    double mean(int c) const { return a[c] / (a[c] + b[c]); }
    /// Index of the component with the smaller mean.
    int low() const { return mean(0) <= mean(1) ? 0 : 1; }
    /// Posterior probability that x came from component c.
    double responsibility(double x, int c) const;
};

/// EM from a median-split method-of-moments start, weighted moments in the
/// M-step, at most 200 iterations or until the log-likelihood moves < 1e-8.
/// Returns nothing for fewer than 8 values or a degenerate (zero variance)
/// sample.
std::optional<BetaMixture> fit_beta_mixture(std::span<const double> values);

/// I(Y_j, X_i) ~ I(Y_j, X_i | Z) + I(Y_j, Z), the second term as the mean KL
/// from the sampled posteriors to the clamped label marginal.
double estimate_mi(double cmi, std::span<const double> posterior_samples, double label_marginal);

/// CAIG (use_imbalance) or plain BES-MI penalty of one parent.
double parent_penalty(double alpha_reg, std::uint64_t m_total, std::uint64_t m_j, bool use_imbalance);

GlobalGraph fuse_union(const EdgeTally& tally);
GlobalGraph fuse_frequency(const EdgeTally& tally, double tau);
GlobalGraph fuse_adaptive(const EdgeTally& tally, double tau_max = 0.5, double tau_min = 0.05);
GlobalGraph fuse_beta_fpr(const EdgeTally& tally, double target_fpr);
/// Backward elimination from the union graph. Edges are visited in `order`
/// ((label, event) pairs, default label-major), and each removal that raises
/// the decomposable score is applied until none is left.
GlobalGraph fuse_bes_caig(const EdgeTally& tally, double alpha_reg, bool use_imbalance,
                          const std::vector<std::pair<LabelId, EventId>>& order = {});

enum class CriterionKind { Union, Frequency, Adaptive, BetaFpr, BesMi, Caig };

struct Criterion {
    CriterionKind kind = CriterionKind::Adaptive;
    double tau = 0.5;
    double tau_max = 0.5;
    double tau_min = 0.05;
    double fpr = 0.05;
    double alpha_reg = 0.01;

    /// "union", "frequency:0.5", "adaptive", "adaptive:0.5:0.05", "beta_fpr:0.05",
    /// "bes_mi:0.01", "caig:0.01". Throws std::invalid_argument.
    static Criterion parse(const std::string& text);
    /// Inverse of parse; always includes the parameters.
    std::string label() const;
    void validate() const;
};

const std::vector<std::string>& criterion_names();
CriterionKind criterion_kind(const std::string& name);
std::string criterion_name(CriterionKind kind);

GlobalGraph fuse(const EdgeTally& tally, const Criterion& criterion);

}  // namespace cargo
