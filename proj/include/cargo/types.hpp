#pragma once

// Domain types shared by every stage: vocabularies, labelled event
// sequences, per-sequence (local) graphs and the fused (global) graph.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace cargo {

using EventId = std::uint32_t;
using LabelId = std::uint32_t;
using SequenceId = std::uint64_t;

/// Event id reserved for the sequence-start marker.
inline constexpr EventId kStartEvent = 0;

/// Posteriors handed out by estimators are clamped to [eps, 1 - eps].
inline constexpr double kPosteriorEps = 1e-6;

/// Dense id <-> name mapping. Ids are [0, size()).
class Vocab {
public:
    Vocab() = default;
    explicit Vocab(std::vector<std::string> names);

    /// "<s>", "x1", ..., "xN": id 0 is the start marker, N real events.
    static Vocab events(std::size_t num_real_events);
    /// "y0", ..., "y{N-1}".
    static Vocab labels(std::size_t num_labels);

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t id) const { return names_.at(id); }
    const std::vector<std::string>& names() const { return names_; }
    /// Throws std::out_of_range for unknown names.
    std::size_t id(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct Event {
    EventId id = kStartEvent;
    double time = 0.0;

    bool operator==(const Event&) const = default;
};

/// A timestamped event list (first event is the start marker) with a binary
/// label vector attached at the end of the sequence.
struct LabeledSequence {
    SequenceId id = 0;
    std::vector<Event> events;
    std::vector<std::uint8_t> labels;  // one 0/1 entry per label

    std::vector<EventId> event_ids() const;
    std::vector<LabelId> positive_labels() const;

    /// Throws std::invalid_argument when an invariant is broken.
    void validate(std::size_t num_events, std::size_t num_labels) const;

    bool operator==(const LabeledSequence&) const = default;
};

/// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// One detected label parent inside a single sequence.
struct LocalEdge {
    EventId event = kStartEvent;
    std::size_t position = 0;  // CMI column i; the cause is the event at i + 1
    double cmi = 0.0;          // nats, always > 0 for stored edges
    double cs_mean = 0.0;      // mean posterior change over sampled contexts
    double cs_std = 0.0;
    double ig_z = 0.0;         // I(Y_j, Z) at this position, 0 when marginals are unknown

    double mi() const { return cmi + ig_z; }

    bool operator==(const LocalEdge&) const = default;
};

/// Phase-1 output for one sequence.
struct LocalGraph {
    SequenceId sequence_id = 0;
    std::vector<LabelId> positive_labels;
    std::vector<std::vector<LocalEdge>> edges;  // indexed by label

    std::size_t num_edges() const;
    /// Checks cmi > 0, position bounds and one edge per (label, position).
    void validate(std::size_t context, std::size_t length) const;

    bool operator==(const LocalGraph&) const = default;
};

struct ParentStat {
    EventId event = kStartEvent;
    double frequency = 0.0;
    std::uint64_t support = 0;
    double mi = 0.0;

    bool operator==(const ParentStat&) const = default;
};

/// Fused bipartite event -> label graph.
struct GlobalGraph {
    std::vector<std::uint64_t> support;            // m_j per label
    std::vector<std::vector<ParentStat>> parents;  // sorted by event id

    GlobalGraph() = default;
    explicit GlobalGraph(std::size_t num_labels) : support(num_labels, 0), parents(num_labels) {}

    std::size_t num_labels() const { return parents.size(); }
    std::size_t num_edges() const;
    bool has_edge(LabelId label, EventId event) const;
    std::vector<EventId> parent_ids(LabelId label) const;

    bool operator==(const GlobalGraph&) const = default;
};

/// Ground-truth Markov boundary per label (sorted event ids).
using GroundTruth = std::vector<std::vector<EventId>>;

}  // namespace cargo
