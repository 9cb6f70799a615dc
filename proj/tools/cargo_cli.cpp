// Command-line entry point: generate, discover, fuse, eval, ablate, pipeline.
//
// Exit status: 0 on success, 2 for usage and configuration errors (bad
// flags, unknown criterion, invalid config file), 1 when a stage fails.

#include <chrono>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "cargo/eval.hpp"
#include "cargo/fusion.hpp"
#include "cargo/io.hpp"
#include "cargo/oneshot.hpp"
#include "cargo/pipeline.hpp"
#include "cargo/world.hpp"

namespace {

using namespace cargo;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flags are bound to optionals so that an unset flag leaves the config-file
// value (or the default) alone.
struct OneShotFlags {
    std::optional<std::size_t> context, samples, top_k, max_len;
    std::optional<double> top_p, threshold_k, eps;

    void add(CLI::App* app) {
        app->add_option("--context,-c", context, "Resampled context length c");
        app->add_option("--samples,-N", samples, "Sampled contexts per sequence");
        app->add_option("--top-k", top_k, "Top-k filter for context sampling");
        app->add_option("--top-p", top_p, "Nucleus mass for context sampling");
        app->add_option("--threshold-k,-k", threshold_k, "Dynamic threshold multiplier");
        app->add_option("--eps", eps, "Posterior clamp");
        app->add_option("--max-len", max_len, "Truncate sequences to this many events");
    }
    void apply(OneShotConfig& c) const {
        if (context) c.context = *context;
        if (samples) c.samples = *samples;
        if (top_k) c.top_k = *top_k;
        if (top_p) c.top_p = *top_p;
        if (threshold_k) c.threshold_k = *threshold_k;
        if (eps) c.eps = *eps;
        if (max_len) c.max_len = *max_len;
    }
};

struct EstimatorFlags {
    std::optional<std::string> kind;
    std::optional<double> alpha, beta, magnitude, delta;
    std::optional<std::size_t> order;
    std::optional<std::uint64_t> noise_seed;

    void add(CLI::App* app) {
        app->add_option("--estimator", kind, "oracle | noisy | ngram");
        app->add_option("--alpha", alpha, "Noisy estimator: spurious-jump rate");
        app->add_option("--beta", beta, "Noisy estimator: miss rate");
        app->add_option("--magnitude", magnitude, "Noisy estimator: jump size in logits");
        app->add_option("--noise-seed", noise_seed, "Noisy estimator: noise stream seed");
        app->add_option("--order", order, "n-gram order");
        app->add_option("--delta", delta, "n-gram additive smoothing");
    }
    void apply(EstimatorConfig& c) const {
        if (kind) c.kind = *kind;
        if (alpha) c.alpha = *alpha;
        if (beta) c.beta = *beta;
        if (magnitude) c.magnitude = *magnitude;
        if (noise_seed) c.seed = *noise_seed;
        if (order) c.order = *order;
        if (delta) c.delta = *delta;
    }
};

struct CriterionFlags {
    std::optional<std::string> name;
    std::optional<double> tau, tau_min, tau_max, fpr, alpha_reg;

    void add(CLI::App* app) {
        app->add_option("--criterion", name, "union | frequency | adaptive | beta_fpr | bes_mi | caig, optionally name:param");
        app->add_option("--tau", tau, "frequency threshold");
        app->add_option("--tau-min", tau_min, "adaptive lower bound");
        app->add_option("--tau-max", tau_max, "adaptive upper bound");
        app->add_option("--fpr", fpr, "beta_fpr false-positive rate");
        app->add_option("--alpha-reg", alpha_reg, "bes_mi / caig penalty weight");
    }
    void apply(Criterion& c) const {
        if (name) c = Criterion::parse(*name);
        if (tau) c.tau = *tau;
        if (tau_min) c.tau_min = *tau_min;
        if (tau_max) c.tau_max = *tau_max;
        if (fpr) c.fpr = *fpr;
        if (alpha_reg) c.alpha_reg = *alpha_reg;
    }
};

struct RunFlags {
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;

    void add(CLI::App* app, bool with_config) {
        if (with_config) app->add_option("--config", config_path, "INI config file; flags override its values");
        app->add_option("--seed", seed, "Random seed");
        app->add_option("--workers,-w", workers, "Worker threads (default: CARGO_WORKERS or all cores)");
    }
    // Config file first, then flags on top.
    RunConfig base() const {
        RunConfig c;
        c.workers = default_workers();
        if (config_path) apply_config_file(c, *config_path);
        if (seed) c.seed = *seed;
        if (workers) c.workers = *workers;
        return c;
    }
};

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, sep);) {
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

// Anything thrown while assembling the configuration is a usage error.
template <typename Fn>
auto configure(Fn fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

template <typename Fn>
auto stage(const std::string& name, Fn fn) {
    try {
        return fn();
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error("[" + name + "] " + e.what());
    }
}

std::string stage_of(const std::string& what) {
    return what.size() > 1 && what.front() == '[' ? "" : "error: ";
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("cargo"));
    spdlog::set_pattern("%^%l%$: %v");

    CLI::App app{"Two-phase multi-label causal discovery over event sequences"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace | debug | info | warn | error | off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    // generate
    auto* gen = app.add_subcommand("generate", "Sample a synthetic world");
    std::string gen_preset = "tiny";
    std::uint64_t gen_m = 1000;
    std::string gen_out;
    RunFlags gen_run;
    gen->add_option("--preset", gen_preset, "tiny | standard | longtail");
    gen->add_option("--m", gen_m, "Number of sequences");
    gen->add_option("--out-dir", gen_out, "Output directory")->required();
    gen_run.add(gen, false);

    // discover
    auto* disc = app.add_subcommand("discover", "Phase 1: per-sequence local graphs");
    std::string disc_sequences, disc_world, disc_out;
    RunFlags disc_run;
    OneShotFlags disc_oneshot;
    EstimatorFlags disc_est;
    disc->add_option("--sequences", disc_sequences, "sequences.jsonl")->required();
    disc->add_option("--world", disc_world, "spec.json (needed by the oracle and noisy estimators)");
    disc->add_option("--out", disc_out, "local_graphs.jsonl")->required();
    disc_run.add(disc, true);
    disc_oneshot.add(disc);
    disc_est.add(disc);

    // fuse
    auto* fus = app.add_subcommand("fuse", "Phase 2: fuse local graphs into one graph");
    std::string fuse_local, fuse_out, fuse_sequences;
    RunFlags fuse_run;
    CriterionFlags fuse_crit;
    fus->add_option("--local", fuse_local, "local_graphs.jsonl")->required();
    fus->add_option("--out", fuse_out, "graph.json")->required();
    fus->add_option("--sequences", fuse_sequences, "Take label supports from sequences.jsonl instead of the local graphs");
    fuse_run.add(fus, true);
    fuse_crit.add(fus);

    // eval
    auto* ev = app.add_subcommand("eval", "Score a graph against the ground truth");
    std::string eval_graph, eval_truth, eval_out, eval_label;
    ev->add_option("--graph", eval_graph, "graph.json")->required();
    ev->add_option("--truth", eval_truth, "ground_truth.json")->required();
    ev->add_option("--out", eval_out, "report.json (stdout when omitted)");
    ev->add_option("--label", eval_label, "Criterion name recorded in the report");

    // ablate
    auto* abl = app.add_subcommand("ablate", "Sweep one parameter and write CSV");
    std::string abl_param, abl_grid, abl_out, abl_criteria = "adaptive", abl_preset = "standard";
    std::uint64_t abl_m = 1000;
    RunFlags abl_run;
    OneShotFlags abl_oneshot;
    EstimatorFlags abl_est;
    abl->add_option("--param", abl_param, "N | k | c | tau | m")
        ->required()
        ->check(CLI::IsMember({"N", "k", "c", "tau", "m"}));
    abl->add_option("--grid", abl_grid, "Comma-separated values")->required();
    abl->add_option("--criteria", abl_criteria, "Comma-separated criteria (ignored for tau)");
    abl->add_option("--preset", abl_preset, "tiny | standard | longtail");
    abl->add_option("--m", abl_m, "Number of sequences (ignored for m)");
    abl->add_option("--out", abl_out, "CSV path (stdout when omitted)");
    abl_run.add(abl, true);
    abl_oneshot.add(abl);
    abl_est.add(abl);

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "generate -> discover -> fuse -> eval");
    std::optional<std::string> pipe_preset, pipe_out;
    std::optional<std::uint64_t> pipe_m;
    RunFlags pipe_run;
    OneShotFlags pipe_oneshot;
    EstimatorFlags pipe_est;
    CriterionFlags pipe_crit;
    pipe->add_option("--preset", pipe_preset, "tiny | standard | longtail");
    pipe->add_option("--m", pipe_m, "Number of sequences");
    pipe->add_option("--out-dir", pipe_out, "Output directory");
    pipe_run.add(pipe, true);
    pipe_oneshot.add(pipe);
    pipe_est.add(pipe);
    pipe_crit.add(pipe);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*gen) {
            const auto spec = configure([&] {
                auto c = gen_run.base();
                return std::make_pair(preset(gen_preset, c.seed.value_or(0)), c.workers);
            });
            if (gen_m == 0) throw UsageError("--m must be >= 1");
            stage("generate", [&] {
                const auto corpus = generate(spec.first, gen_m, spec.second);
                io::write_sequences(fs::path(gen_out) / "sequences.jsonl", corpus.sequences);
                io::write_truth(fs::path(gen_out) / "ground_truth.json", corpus.truth);
                io::write_spec(fs::path(gen_out) / "spec.json", spec.first);
                spdlog::info("[generate] {} sequences, {} labels -> {}", gen_m, spec.first.num_labels(), gen_out);
            });
        } else if (*disc) {
            const auto c = configure([&] {
                auto c = disc_run.base();
                disc_oneshot.apply(c.oneshot);
                disc_est.apply(c.estimator);
                c.oneshot.validate();
                c.estimator.validate();
                if (c.estimator.kind != "ngram" && disc_world.empty()) {
                    throw std::invalid_argument("--world spec.json is required for the " + c.estimator.kind + " estimator");
                }
                return c;
            });
            stage("discover", [&] {
                const auto sequences = io::read_sequences(disc_sequences);
                std::optional<GeneratorSpec> world;
                if (!disc_world.empty()) world = io::read_spec(disc_world);
                const std::uint64_t seed = c.seed.value_or(0);
                const auto estimator = make_estimator(c.estimator, world ? &*world : nullptr, sequences, seed);
                for (const auto& s : sequences) s.validate(estimator->num_events(), estimator->num_labels());
                const auto marginals = label_marginals(sequences, estimator->num_labels());
                const auto start = std::chrono::steady_clock::now();
                const auto result = discover_batch(*estimator, sequences, c.oneshot, seed, c.workers, marginals);
                if (result.graphs.empty() && !sequences.empty()) {
                    throw std::runtime_error("every sequence is shorter than context + 2 = " +
                                             std::to_string(c.oneshot.context + 2) + " events; lower --context");
                }
                io::write_local_graphs(disc_out, result.graphs);
                const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                spdlog::info("[discover] {} local graphs ({} skipped) in {:.3f} s", result.graphs.size(), result.skipped, s);
            });
        } else if (*fus) {
            const auto c = configure([&] {
                auto c = fuse_run.base();
                fuse_crit.apply(c.criterion);
                c.criterion.validate();
                return c;
            });
            stage("fuse", [&] {
                const auto local = io::read_local_graphs(fuse_local);
                const std::size_t labels = local.empty() ? 0 : local.front().edges.size();
                EdgeTally t(labels);
                if (fuse_sequences.empty()) {
                    t = tally(local, labels);
                } else {
                    const auto sequences = io::read_sequences(fuse_sequences);
                    const std::size_t n = sequences.empty() ? labels : sequences.front().labels.size();
                    if (!local.empty() && n != labels) throw std::runtime_error("label count differs between local graphs and sequences");
                    t = tally(local, sequences, n);
                }
                io::write_graph(fuse_out, fuse(t, c.criterion));
                spdlog::info("[fuse] {} over {} local graphs -> {}", c.criterion.label(), local.size(), fuse_out);
            });
        } else if (*ev) {
            stage("eval", [&] {
                const auto truth = io::read_truth(eval_truth);
                const auto graph = io::read_graph(eval_graph, truth.size());
                const auto report = score(graph, truth);
                const auto text = io::report_to_json(report, eval_label);
                if (eval_out.empty()) {
                    std::cout << text;
                } else {
                    io::write_text(eval_out, text);
                }
                spdlog::info("[eval] weighted P {:.3f} R {:.3f} F1 {:.3f}, macro F1 {:.3f}", report.weighted.precision,
                             report.weighted.recall, report.weighted.f1, report.macro.f1);
            });
        } else if (*abl) {
            struct Plan {
                RunConfig config;
                std::vector<std::string> grid;
                std::vector<Criterion> criteria;
            };
            const auto plan = configure([&] {
                Plan p;
                p.config = abl_run.base();
                abl_oneshot.apply(p.config.oneshot);
                abl_est.apply(p.config.estimator);
                p.config.preset = abl_preset;
                p.config.m = abl_m;
                p.grid = split(abl_grid, ',');
                if (p.grid.empty()) throw std::invalid_argument("--grid is empty");
                for (const auto& name : split(abl_criteria, ',')) p.criteria.push_back(Criterion::parse(name));
                if (p.criteria.empty()) throw std::invalid_argument("--criteria is empty");
                for (const auto& cr : p.criteria) cr.validate();
                p.config.validate();
                return p;
            });
            // Validate every grid value before any work starts.
            std::vector<RunConfig> variants;
            std::vector<std::uint64_t> m_grid;
            configure([&] {
                for (const auto& v : plan.grid) {
                    RunConfig c = plan.config;
                    if (abl_param == "N") {
                        c.oneshot.samples = std::stoul(v);
                    } else if (abl_param == "k") {
                        c.oneshot.threshold_k = std::stod(v);
                    } else if (abl_param == "c") {
                        c.oneshot.context = std::stoul(v);
                    } else if (abl_param == "tau") {
                        c.criterion = Criterion::parse("frequency:" + v);
                        c.criterion.validate();
                    } else {
                        m_grid.push_back(std::stoull(v));
                        if (m_grid.back() == 0) throw std::invalid_argument("m grid values must be >= 1");
                    }
                    c.oneshot.validate();
                    variants.push_back(c);
                }
                return 0;
            });
            stage("ablate", [&] {
                const auto& base = plan.config;
                const std::uint64_t seed = base.seed.value_or(0);
                const std::uint64_t m = m_grid.empty() ? base.m : *std::max_element(m_grid.begin(), m_grid.end());
                const auto spec = preset(base.preset, seed);
                const auto corpus = generate(spec, m, base.workers);
                const auto estimator = make_estimator(base.estimator, &spec, corpus.sequences, seed);
                std::string csv;
                if (abl_param == "m") {
                    csv = sweep_csv_header() +
                          sweep_csv(sweep(*estimator, corpus.sequences, corpus.truth, base.oneshot, seed, base.workers,
                                          plan.criteria, m_grid));
                } else if (abl_param == "tau") {
                    std::vector<Criterion> taus;
                    for (const auto& v : variants) taus.push_back(v.criterion);
                    const auto rows = sweep(*estimator, corpus.sequences, corpus.truth, base.oneshot, seed, base.workers, taus, {m});
                    csv = sweep_csv_header("tau");
                    for (std::size_t i = 0; i < rows.size(); ++i) csv += sweep_csv({rows[i]}, "tau", plan.grid[i]);
                } else {
                    csv = sweep_csv_header(abl_param);
                    for (std::size_t i = 0; i < variants.size(); ++i) {
                        const auto rows = sweep(*estimator, corpus.sequences, corpus.truth, variants[i].oneshot, seed,
                                                base.workers, plan.criteria, {m});
                        csv += sweep_csv(rows, abl_param, plan.grid[i]);
                        spdlog::info("[ablate] {} = {} done", abl_param, plan.grid[i]);
                    }
                }
                if (abl_out.empty()) {
                    std::cout << csv;
                } else {
                    io::write_text(abl_out, csv);
                }
            });
        } else if (*pipe) {
            const auto c = configure([&] {
                auto c = pipe_run.base();
                if (pipe_preset) c.preset = *pipe_preset;
                if (pipe_m) c.m = *pipe_m;
                if (pipe_out) c.out_dir = *pipe_out;
                pipe_oneshot.apply(c.oneshot);
                pipe_est.apply(c.estimator);
                pipe_crit.apply(c.criterion);
                if (!c.seed && ci_mode()) throw std::invalid_argument("--seed is mandatory when CI is set");
                c.validate();
                return c;
            });
            if (!c.seed) spdlog::warn("no --seed given, using 0");
            run_pipeline(c);
        }
    } catch (const UsageError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}{}", stage_of(e.what()), e.what());
        return 1;
    }
    return 0;
}
