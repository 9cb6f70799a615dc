#pragma once

// Stage functions behind the command-line tool, plus the run configuration
// they share. Each stage reads and writes the formats in io.hpp.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cargo/estimator.hpp"
#include "cargo/eval.hpp"
#include "cargo/fusion.hpp"
#include "cargo/oneshot.hpp"
#include "cargo/world.hpp"

namespace cargo {

namespace fs = std::filesystem;

struct EstimatorConfig {
    std::string kind = "oracle";  // oracle | noisy | ngram
    double alpha = 0.05;
    double beta = 0.2;
    double magnitude = 3.0;
    std::size_t order = 2;
    double delta = 0.1;
    /// Noise stream of the noisy estimator; derived from the run seed when unset.
    std::optional<std::uint64_t> seed;

    void validate() const;
};

const std::vector<std::string>& estimator_names();

struct RunConfig {
    std::string preset = "tiny";
    std::uint64_t m = 1000;
    OneShotConfig oneshot;
    EstimatorConfig estimator;
    Criterion criterion;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    fs::path out_dir = "run";

    /// Throws std::invalid_argument.
    void validate() const;
};

/// Reads an INI-style file:
///
///   [run]       seed, workers, out_dir
///   [generate]  preset, m
///   [discover]  context, samples, top_k, top_p, threshold_k, eps, max_len,
///               estimator, alpha, beta, magnitude, order, delta, noise_seed
///   [fuse]      criterion, tau, tau_min, tau_max, fpr, alpha_reg
///
/// '#' and ';' start comments. Unknown sections or keys, malformed values
/// and repeated keys throw std::invalid_argument naming the line.
void apply_config_text(RunConfig& config, const std::string& text, const std::string& source = "config");
void apply_config_file(RunConfig& config, const fs::path& path);

/// Worker count from CARGO_WORKERS, else the hardware concurrency.
std::size_t default_workers();
/// True when the CI environment variable is set to something other than "", "0" or "false".
bool ci_mode();

/// Builds the estimator. The oracle and noisy estimators need the world
/// spec; the n-gram estimator is fitted on `training` (and needs the spec
/// only for vocabulary sizes, inferred from the data when absent).
std::shared_ptr<const ConditionalEstimator> make_estimator(const EstimatorConfig& config, const GeneratorSpec* spec,
                                                           const std::vector<LabeledSequence>& training,
                                                           std::uint64_t seed);

struct StageTimings {
    std::vector<std::pair<std::string, double>> seconds;
    std::string to_json() const;
};

/// generate -> discover -> fuse -> eval into config.out_dir. Writes
/// sequences.jsonl, ground_truth.json, spec.json, local_graphs.jsonl,
/// graph.json, report.json and timings.json. Everything except
/// timings.json depends only on the config, not on the worker count.
StageTimings run_pipeline(const RunConfig& config);

}  // namespace cargo
