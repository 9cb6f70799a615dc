#include "cargo/io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cargo::io {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const fs::path& path, const std::string& what, std::size_t line = 0) {
    std::string where = path.string();
    if (line > 0) where += ":" + std::to_string(line);
    throw std::runtime_error(where + ": " + what);
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open for reading");
    return in;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(path, "cannot open for writing");
    return out;
}

// "x17" -> 17, "y3" -> 3. Event names start at x1; x0 does not exist.
std::size_t parse_name(const std::string& name, char prefix, std::size_t min_id) {
    std::size_t id = 0;
    const char* first = name.data() + 1;
    const char* last = name.data() + name.size();
    if (name.size() < 2 || name[0] != prefix || (name.size() > 2 && name[1] == '0')) {
        throw std::invalid_argument("bad name '" + name + "'");
    }
    auto [ptr, ec] = std::from_chars(first, last, id);
    if (ec != std::errc() || ptr != last || id < min_id) throw std::invalid_argument("bad name '" + name + "'");
    return id;
}

std::string event_name(EventId e) { return "x" + std::to_string(e); }
std::string label_name(LabelId j) { return "y" + std::to_string(j); }

template <typename Fn>
void for_each_line(const fs::path& path, Fn fn) {
    auto in = open_in(path);
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            fn(json::parse(text));
        } catch (const std::exception& e) {
            fail(path, e.what(), line);
        }
    }
}

json parse_file(const fs::path& path) {
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    if (!out) fail(path, "write failed");
}

std::string read_text(const fs::path& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------

void write_sequences(const fs::path& path, const std::vector<LabeledSequence>& sequences) {
    auto out = open_out(path);
    for (const auto& s : sequences) {
        json events = json::array();
        for (const auto& e : s.events) events.push_back(json::array({e.id, e.time}));
        out << json{{"id", s.id},
                    {"events", std::move(events)},
                    {"labels", s.positive_labels()},
                    {"num_labels", s.labels.size()}}
                   .dump()
            << '\n';
    }
    if (!out) fail(path, "write failed");
}

std::vector<LabeledSequence> read_sequences(const fs::path& path) {
    std::vector<LabeledSequence> out;
    std::set<SequenceId> seen;
    for_each_line(path, [&](const json& j) {
        LabeledSequence s;
        s.id = j.at("id").get<SequenceId>();
        if (!seen.insert(s.id).second) throw std::invalid_argument("duplicate sequence id " + std::to_string(s.id));
        for (const auto& e : j.at("events")) {
            if (!e.is_array() || e.size() != 2) throw std::invalid_argument("event must be [id, time]");
            s.events.push_back(Event{e[0].get<EventId>(), e[1].get<double>()});
        }
        s.labels.assign(j.at("num_labels").get<std::size_t>(), 0);
        for (const auto& v : j.at("labels")) {
            const auto label = v.get<LabelId>();
            if (label >= s.labels.size()) throw std::invalid_argument("unknown label id " + std::to_string(label));
            if (s.labels[label]) throw std::invalid_argument("label " + std::to_string(label) + " listed twice");
            s.labels[label] = 1;
        }
        if (s.events.empty() || s.events.front().id != kStartEvent) {
            throw std::invalid_argument("sequence " + std::to_string(s.id) + " must start with the start marker");
        }
        if (!out.empty() && s.labels.size() != out.front().labels.size()) {
            throw std::invalid_argument("num_labels differs from the first sequence");
        }
        out.push_back(std::move(s));
    });
    return out;
}

// ---------------------------------------------------------------------------

void write_local_graphs(const fs::path& path, const std::vector<LocalGraph>& graphs) {
    auto out = open_out(path);
    for (const auto& g : graphs) {
        json edges = json::array();
        for (LabelId j = 0; j < g.edges.size(); ++j) {
            for (const auto& e : g.edges[j]) {
                edges.push_back({{"label", j},
                                 {"event", e.event},
                                 {"position", e.position},
                                 {"cmi", e.cmi},
                                 {"cs_mean", e.cs_mean},
                                 {"cs_std", e.cs_std},
                                 {"ig_z", e.ig_z}});
            }
        }
        out << json{{"id", g.sequence_id},
                    {"num_labels", g.edges.size()},
                    {"positive_labels", g.positive_labels},
                    {"edges", std::move(edges)}}
                   .dump()
            << '\n';
    }
    if (!out) fail(path, "write failed");
}

std::vector<LocalGraph> read_local_graphs(const fs::path& path) {
    std::vector<LocalGraph> out;
    std::set<SequenceId> seen;
    for_each_line(path, [&](const json& j) {
        LocalGraph g;
        g.sequence_id = j.at("id").get<SequenceId>();
        if (!seen.insert(g.sequence_id).second) {
            throw std::invalid_argument("duplicate local graph for sequence " + std::to_string(g.sequence_id));
        }
        const auto labels = j.at("num_labels").get<std::size_t>();
        g.edges.resize(labels);
        g.positive_labels = j.at("positive_labels").get<std::vector<LabelId>>();
        for (auto p : g.positive_labels) {
            if (p >= labels) throw std::invalid_argument("positive label " + std::to_string(p) + " out of range");
        }
        for (const auto& e : j.at("edges")) {
            const auto label = e.at("label").get<LabelId>();
            if (label >= labels) throw std::invalid_argument("edge label " + std::to_string(label) + " out of range");
            LocalEdge edge;
            edge.event = e.at("event").get<EventId>();
            edge.position = e.at("position").get<std::size_t>();
            edge.cmi = e.at("cmi").get<double>();
            edge.cs_mean = e.at("cs_mean").get<double>();
            edge.cs_std = e.at("cs_std").get<double>();
            edge.ig_z = e.at("ig_z").get<double>();
            if (edge.event == kStartEvent) throw std::invalid_argument("the start marker cannot be a cause");
            if (!(edge.cmi > 0.0)) throw std::invalid_argument("stored edges must have cmi > 0");
            for (const auto& other : g.edges[label]) {
                if (other.event == edge.event) {
                    throw std::invalid_argument("duplicate edge (y" + std::to_string(label) + ", x" +
                                                std::to_string(edge.event) + ")");
                }
            }
            g.edges[label].push_back(edge);
        }
        if (!out.empty() && out.front().edges.size() != labels) {
            throw std::invalid_argument("num_labels differs from the first local graph");
        }
        out.push_back(std::move(g));
    });
    return out;
}

// ---------------------------------------------------------------------------

std::string graph_to_json(const GlobalGraph& graph) {
    json doc = json::object();
    for (LabelId j = 0; j < graph.num_labels(); ++j) {
        if (graph.support[j] == 0) continue;
        json parents = json::array();
        for (const auto& p : graph.parents[j]) {
            parents.push_back(
                {{"event", event_name(p.event)}, {"frequency", p.frequency}, {"support", p.support}, {"mi", p.mi}});
        }
        doc[label_name(j)] = {{"support", graph.support[j]}, {"parents", std::move(parents)}};
    }
    return doc.dump(2) + "\n";
}

void write_graph(const fs::path& path, const GlobalGraph& graph) { write_text(path, graph_to_json(graph)); }

GlobalGraph read_graph(const fs::path& path, std::size_t num_labels) {
    const json doc = parse_file(path);
    GlobalGraph g(num_labels);
    try {
        for (const auto& [name, entry] : doc.items()) {
            const auto j = parse_name(name, 'y', 0);
            if (j >= num_labels) throw std::invalid_argument("label " + name + " is not in the ground truth");
            g.support[j] = entry.at("support").get<std::uint64_t>();
            std::set<EventId> seen;
            for (const auto& p : entry.at("parents")) {
                ParentStat s;
                s.event = static_cast<EventId>(parse_name(p.at("event").get<std::string>(), 'x', 1));
                s.frequency = p.at("frequency").get<double>();
                s.support = p.at("support").get<std::uint64_t>();
                s.mi = p.at("mi").get<double>();
                if (!seen.insert(s.event).second) {
                    throw std::invalid_argument("duplicate parent x" + std::to_string(s.event) + " of " + name);
                }
                g.parents[j].push_back(s);
            }
            std::sort(g.parents[j].begin(), g.parents[j].end(),
                      [](const ParentStat& a, const ParentStat& b) { return a.event < b.event; });
        }
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
    return g;
}

// ---------------------------------------------------------------------------

void write_truth(const fs::path& path, const GroundTruth& truth) {
    json doc = json::object();
    for (LabelId j = 0; j < truth.size(); ++j) {
        json names = json::array();
        for (auto e : truth[j]) names.push_back(event_name(e));
        doc[label_name(j)] = std::move(names);
    }
    write_text(path, doc.dump(2) + "\n");
}

GroundTruth read_truth(const fs::path& path) {
    const json doc = parse_file(path);
    GroundTruth truth;
    try {
        std::vector<std::pair<std::size_t, std::vector<EventId>>> entries;
        for (const auto& [name, events] : doc.items()) {
            std::vector<EventId> ids;
            for (const auto& e : events) ids.push_back(static_cast<EventId>(parse_name(e.get<std::string>(), 'x', 1)));
            std::sort(ids.begin(), ids.end());
            if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
                throw std::invalid_argument("duplicate event in the truth of " + name);
            }
            entries.emplace_back(parse_name(name, 'y', 0), std::move(ids));
        }
        truth.resize(entries.size());
        std::vector<bool> filled(entries.size(), false);
        for (auto& [j, ids] : entries) {
            if (j >= entries.size()) throw std::invalid_argument("label ids must be y0..y" + std::to_string(entries.size() - 1));
            if (filled[j]) throw std::invalid_argument("label y" + std::to_string(j) + " listed twice");
            truth[j] = std::move(ids);
            filled[j] = true;
        }
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
    return truth;
}

// ---------------------------------------------------------------------------

void write_spec(const fs::path& path, const GeneratorSpec& spec) {
    json rules = json::array();
    for (const auto& r : spec.rules) rules.push_back({{"positive", r.positive}, {"negated", r.negated}});
    json doc{{"name", spec.name},
             {"num_events", spec.num_events},
             {"length", spec.length},
             {"zipf_exponent", spec.zipf_exponent},
             {"seed", spec.seed},
             {"rules", std::move(rules)},
             {"transition", spec.transition}};
    write_text(path, doc.dump() + "\n");
}

GeneratorSpec read_spec(const fs::path& path) {
    const json doc = parse_file(path);
    GeneratorSpec spec;
    try {
        spec.name = doc.at("name").get<std::string>();
        spec.num_events = doc.at("num_events").get<std::size_t>();
        spec.length = doc.at("length").get<std::size_t>();
        spec.zipf_exponent = doc.at("zipf_exponent").get<double>();
        spec.seed = doc.at("seed").get<std::uint64_t>();
        spec.transition = doc.at("transition").get<std::vector<std::vector<double>>>();
        for (const auto& r : doc.at("rules")) {
            spec.rules.push_back(LabelRule{r.at("positive").get<std::vector<EventId>>(), r.at("negated").get<std::vector<EventId>>()});
        }
        spec.validate();
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
    return spec;
}

// ---------------------------------------------------------------------------

std::string report_to_json(const EvalReport& report, const std::string& criterion) {
    auto avg = [](const Averages& a) { return json{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}}; };
    json labels = json::object();
    for (LabelId j = 0; j < report.labels.size(); ++j) {
        const auto& s = report.labels[j];
        labels[label_name(j)] = {{"precision", s.precision}, {"recall", s.recall},       {"f1", s.f1},
                                 {"support", s.support},     {"predicted", s.predicted}, {"truth", s.truth},
                                 {"true_positives", s.true_positives}};
    }
    json doc{{"criterion", criterion}, {"m", report.m}, {"weighted", avg(report.weighted)}, {"macro", avg(report.macro)},
             {"labels", std::move(labels)}};
    return doc.dump(2) + "\n";
}

}  // namespace cargo::io
