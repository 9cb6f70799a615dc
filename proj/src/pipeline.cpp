#include "cargo/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

#include "cargo/io.hpp"
#include "cargo/ngram_estimator.hpp"
#include "cargo/noisy_estimator.hpp"
#include "cargo/oracle_estimator.hpp"
#include "cargo/random.hpp"
#include "json.hpp"

namespace cargo {

void EstimatorConfig::validate() const {
    const auto& names = estimator_names();
    if (std::find(names.begin(), names.end(), kind) == names.end()) {
        throw std::invalid_argument("unknown estimator '" + kind + "' (valid: oracle, noisy, ngram)");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("estimator alpha must be in [0, 1]");
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("estimator beta must be in [0, 1]");
    if (!(magnitude > 0.0)) throw std::invalid_argument("estimator magnitude must be > 0");
    if (order == 0) throw std::invalid_argument("n-gram order must be >= 1");
    if (!(delta > 0.0)) throw std::invalid_argument("n-gram delta must be > 0");
}

const std::vector<std::string>& estimator_names() {
    static const std::vector<std::string> names{"oracle", "noisy", "ngram"};
    return names;
}

void RunConfig::validate() const {
    if (preset != "tiny" && preset != "standard" && preset != "longtail") {
        throw std::invalid_argument("unknown preset '" + preset + "' (valid: tiny, standard, longtail)");
    }
    if (m == 0) throw std::invalid_argument("m must be >= 1");
    if (workers == 0) throw std::invalid_argument("workers must be >= 1");
    if (out_dir.empty()) throw std::invalid_argument("out_dir must not be empty");
    oneshot.validate();
    estimator.validate();
    criterion.validate();
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& text) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (text.empty() || ec != std::errc() || ptr != last) {
        throw std::invalid_argument(std::string(std::is_floating_point_v<T> ? "expected a number" : "expected a non-negative integer") +
                                    ", got '" + text + "'");
    }
    return value;
}

using Setter = void (*)(RunConfig&, const std::string&);

const std::map<std::string, std::map<std::string, Setter>>& config_keys() {
    static const std::map<std::string, std::map<std::string, Setter>> keys{
        {"run",
         {
             {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>(v); }},
             {"workers", [](RunConfig& c, const std::string& v) { c.workers = parse_number<std::size_t>(v); }},
             {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
         }},
        {"generate",
         {
             {"preset", [](RunConfig& c, const std::string& v) { c.preset = v; }},
             {"m", [](RunConfig& c, const std::string& v) { c.m = parse_number<std::uint64_t>(v); }},
         }},
        {"discover",
         {
             {"context", [](RunConfig& c, const std::string& v) { c.oneshot.context = parse_number<std::size_t>(v); }},
             {"samples", [](RunConfig& c, const std::string& v) { c.oneshot.samples = parse_number<std::size_t>(v); }},
             {"top_k", [](RunConfig& c, const std::string& v) { c.oneshot.top_k = parse_number<std::size_t>(v); }},
             {"top_p", [](RunConfig& c, const std::string& v) { c.oneshot.top_p = parse_number<double>(v); }},
             {"threshold_k", [](RunConfig& c, const std::string& v) { c.oneshot.threshold_k = parse_number<double>(v); }},
             {"eps", [](RunConfig& c, const std::string& v) { c.oneshot.eps = parse_number<double>(v); }},
             {"max_len", [](RunConfig& c, const std::string& v) { c.oneshot.max_len = parse_number<std::size_t>(v); }},
             {"estimator", [](RunConfig& c, const std::string& v) { c.estimator.kind = v; }},
             {"alpha", [](RunConfig& c, const std::string& v) { c.estimator.alpha = parse_number<double>(v); }},
             {"beta", [](RunConfig& c, const std::string& v) { c.estimator.beta = parse_number<double>(v); }},
             {"magnitude", [](RunConfig& c, const std::string& v) { c.estimator.magnitude = parse_number<double>(v); }},
             {"order", [](RunConfig& c, const std::string& v) { c.estimator.order = parse_number<std::size_t>(v); }},
             {"delta", [](RunConfig& c, const std::string& v) { c.estimator.delta = parse_number<double>(v); }},
             {"noise_seed", [](RunConfig& c, const std::string& v) { c.estimator.seed = parse_number<std::uint64_t>(v); }},
         }},
        {"fuse",
         {
             {"criterion", [](RunConfig& c, const std::string& v) { c.criterion.kind = criterion_kind(v); }},
             {"tau", [](RunConfig& c, const std::string& v) { c.criterion.tau = parse_number<double>(v); }},
             {"tau_min", [](RunConfig& c, const std::string& v) { c.criterion.tau_min = parse_number<double>(v); }},
             {"tau_max", [](RunConfig& c, const std::string& v) { c.criterion.tau_max = parse_number<double>(v); }},
             {"fpr", [](RunConfig& c, const std::string& v) { c.criterion.fpr = parse_number<double>(v); }},
             {"alpha_reg", [](RunConfig& c, const std::string& v) { c.criterion.alpha_reg = parse_number<double>(v); }},
         }},
    };
    return keys;
}

}  // namespace

void apply_config_text(RunConfig& config, const std::string& text, const std::string& source) {
    const auto& keys = config_keys();
    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::set<std::string> seen;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto where = source + ":" + std::to_string(line) + ": ";
        std::string s = raw;
        if (const auto hash = s.find_first_of("#;"); hash != std::string::npos) s.erase(hash);
        s = trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw std::invalid_argument(where + "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (!keys.count(section)) {
                throw std::invalid_argument(where + "unknown section [" + section + "] (valid: run, generate, discover, fuse)");
            }
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw std::invalid_argument(where + "expected key = value");
        const auto key = trim(s.substr(0, eq));
        const auto value = trim(s.substr(eq + 1));
        if (section.empty()) throw std::invalid_argument(where + "key '" + key + "' outside a section");
        const auto& section_keys = keys.at(section);
        const auto it = section_keys.find(key);
        if (it == section_keys.end()) throw std::invalid_argument(where + "unknown key '" + key + "' in [" + section + "]");
        if (!seen.insert(section + "." + key).second) throw std::invalid_argument(where + "repeated key '" + key + "'");
        try {
            it->second(config, value);
        } catch (const std::exception& e) {
            throw std::invalid_argument(where + key + ": " + e.what());
        }
    }
}

void apply_config_file(RunConfig& config, const fs::path& path) {
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const std::exception& e) {
        throw std::invalid_argument(e.what());
    }
    apply_config_text(config, text, path.string());
}

std::size_t default_workers() {
    if (const char* env = std::getenv("CARGO_WORKERS"); env && *env) {
        try {
            const auto n = parse_number<std::size_t>(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
        spdlog::warn("ignoring CARGO_WORKERS='{}' (expected a positive integer)", env);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

bool ci_mode() {
    const char* env = std::getenv("CI");
    if (!env) return false;
    const std::string v = env;
    return !v.empty() && v != "0" && v != "false";
}

// ---------------------------------------------------------------------------

std::shared_ptr<const ConditionalEstimator> make_estimator(const EstimatorConfig& config, const GeneratorSpec* spec,
                                                           const std::vector<LabeledSequence>& training,
                                                           std::uint64_t seed) {
    config.validate();
    if (config.kind == "ngram") {
        if (training.empty()) throw std::invalid_argument("the n-gram estimator needs training sequences");
        std::size_t vocab = spec ? spec->vocab_size() : 0;
        if (!spec) {
            for (const auto& s : training) {
                for (const auto& e : s.events) vocab = std::max<std::size_t>(vocab, std::size_t{e.id} + 1);
            }
        }
        const std::size_t num_labels = spec ? spec->num_labels() : training.front().labels.size();
        return std::make_shared<NGramEstimator>(fit_ngram(training, vocab, num_labels, config.order, config.delta));
    }
    if (!spec) throw std::invalid_argument("the " + config.kind + " estimator needs the world spec");
    auto oracle = std::make_shared<OracleEstimator>(*spec);
    if (config.kind == "oracle") return oracle;
    NoiseConfig noise;
    noise.alpha = config.alpha;
    noise.beta = config.beta;
    noise.magnitude = config.magnitude;
    noise.seed = config.seed.value_or(derive_seed({seed, 0x6e6f697365ULL}));
    return std::make_shared<NoisyEstimator>(oracle, noise);
}

std::string StageTimings::to_json() const {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    double total = 0.0;
    for (const auto& [stage, s] : seconds) {
        doc[stage] = s;
        total += s;
    }
    doc["total"] = total;
    return doc.dump(2) + "\n";
}

namespace {

template <typename Fn>
auto timed_stage(StageTimings& timings, const std::string& stage, Fn fn) {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&] {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        timings.seconds.emplace_back(stage, s);
        spdlog::info("[{}] {:.3f} s", stage, s);
    };
    try {
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            finish();
        } else {
            auto result = fn();
            finish();
            return result;
        }
    } catch (const std::exception& e) {
        throw std::runtime_error("[" + stage + "] " + e.what());
    }
}

}  // namespace

StageTimings run_pipeline(const RunConfig& config) {
    try {
        config.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("[config] ") + e.what());
    }
    const std::uint64_t seed = config.seed.value_or(0);
    const auto& dir = config.out_dir;
    StageTimings timings;

    const auto spec = timed_stage(timings, "generate", [&] {
        auto spec = preset(config.preset, seed);
        auto corpus = generate(spec, config.m, config.workers);
        fs::create_directories(dir);
        io::write_sequences(dir / "sequences.jsonl", corpus.sequences);
        io::write_truth(dir / "ground_truth.json", corpus.truth);
        io::write_spec(dir / "spec.json", spec);
        return spec;
    });

    // Each stage reads what the previous one wrote, so the files on disk are
    // exactly what the standalone subcommands would see.
    const auto graphs = timed_stage(timings, "discover", [&] {
        const auto sequences = io::read_sequences(dir / "sequences.jsonl");
        const auto world = io::read_spec(dir / "spec.json");
        const auto estimator = make_estimator(config.estimator, &world, sequences, seed);
        const auto marginals = label_marginals(sequences, world.num_labels());
        auto result = discover_batch(*estimator, sequences, config.oneshot, seed, config.workers, marginals);
        if (result.graphs.empty()) {
            throw std::runtime_error("every sequence is shorter than context + 2 = " +
                                     std::to_string(config.oneshot.context + 2) + " events; lower the context");
        }
        io::write_local_graphs(dir / "local_graphs.jsonl", result.graphs);
        return result.graphs.size();
    });
    spdlog::info("[discover] {} local graphs", graphs);

    timed_stage(timings, "fuse", [&] {
        const auto local = io::read_local_graphs(dir / "local_graphs.jsonl");
        const auto edge_tally = tally(local, spec.num_labels());
        io::write_graph(dir / "graph.json", fuse(edge_tally, config.criterion));
    });

    timed_stage(timings, "eval", [&] {
        const auto truth = io::read_truth(dir / "ground_truth.json");
        const auto graph = io::read_graph(dir / "graph.json", truth.size());
        auto report = score(graph, truth);
        io::write_text(dir / "report.json", io::report_to_json(report, config.criterion.label()));
        spdlog::info("[eval] weighted P {:.3f} R {:.3f} F1 {:.3f}, macro F1 {:.3f}", report.weighted.precision,
                     report.weighted.recall, report.weighted.f1, report.macro.f1);
    });

    io::write_text(dir / "timings.json", timings.to_json());
    return timings;
}

}  // namespace cargo
