#pragma once

// On-disk formats. Sequences and local graphs are JSON lines keyed by
// integer ids; the world spec uses ids as well; ground truth, global graphs
// and reports use names ("x17", "y3") so they can be read without the spec.
//
// All readers throw std::runtime_error naming the file (and line for JSONL).

#include <filesystem>
#include <string>
#include <vector>

#include "cargo/eval.hpp"
#include "cargo/types.hpp"
#include "cargo/world.hpp"

namespace cargo::io {

namespace fs = std::filesystem;

// {"id": 3, "events": [[0, 0.0], [17, 0.42], ...], "labels": [1, 4], "num_labels": 20}
// `labels` lists the positive label ids.
void write_sequences(const fs::path& path, const std::vector<LabeledSequence>& sequences);
std::vector<LabeledSequence> read_sequences(const fs::path& path);

// {"id": 3, "num_labels": 20, "positive_labels": [1],
//  "edges": [{"label": 1, "event": 17, "position": 22, "cmi": ..., "cs_mean": ..., "cs_std": ..., "ig_z": ...}]}
void write_local_graphs(const fs::path& path, const std::vector<LocalGraph>& graphs);
std::vector<LocalGraph> read_local_graphs(const fs::path& path);

// {"y0": {"support": 112, "parents": [{"event": "x5", "frequency": 0.12, "support": 112, "mi": 0.8}]}}
// Labels without support are left out; supported labels keep an empty
// parent list.
std::string graph_to_json(const GlobalGraph& graph);
void write_graph(const fs::path& path, const GlobalGraph& graph);
/// `num_labels` sizes the result; a label name beyond it throws, a label
/// missing from the file is read as unsupported with no parents.
GlobalGraph read_graph(const fs::path& path, std::size_t num_labels);

// {"y0": ["x1", "x5", ...], ...}
void write_truth(const fs::path& path, const GroundTruth& truth);
GroundTruth read_truth(const fs::path& path);

void write_spec(const fs::path& path, const GeneratorSpec& spec);
GeneratorSpec read_spec(const fs::path& path);

std::string report_to_json(const EvalReport& report, const std::string& criterion);
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace cargo::io
