#include "cargo/types.hpp"

#include <algorithm>
#include <set>
#include <utility>

namespace cargo {

Vocab::Vocab(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (!index_.emplace(names_[i], i).second) {
            throw std::invalid_argument("duplicate vocabulary name '" + names_[i] + "'");
        }
    }
}

Vocab Vocab::events(std::size_t num_real_events) {
    std::vector<std::string> names;
    names.reserve(num_real_events + 1);
    names.emplace_back("<s>");
    for (std::size_t i = 1; i <= num_real_events; ++i) names.push_back("x" + std::to_string(i));
    return Vocab(std::move(names));
}

Vocab Vocab::labels(std::size_t num_labels) {
    std::vector<std::string> names;
    names.reserve(num_labels);
    for (std::size_t i = 0; i < num_labels; ++i) names.push_back("y" + std::to_string(i));
    return Vocab(std::move(names));
}

std::size_t Vocab::id(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown vocabulary name '" + name + "'");
    return it->second;
}

std::vector<EventId> LabeledSequence::event_ids() const {
    std::vector<EventId> ids;
    ids.reserve(events.size());
    for (const auto& e : events) ids.push_back(e.id);
    return ids;
}

std::vector<LabelId> LabeledSequence::positive_labels() const {
    std::vector<LabelId> out;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        if (labels[j]) out.push_back(static_cast<LabelId>(j));
    }
    return out;
}

void LabeledSequence::validate(std::size_t num_events, std::size_t num_labels) const {
    const std::string where = "sequence " + std::to_string(id) + ": ";
    if (events.empty()) throw std::invalid_argument(where + "no events");
    if (events.front().id != kStartEvent) throw std::invalid_argument(where + "first event is not the start marker");
    if (labels.size() != num_labels) {
        throw std::invalid_argument(where + "label vector has length " + std::to_string(labels.size()) +
                                    ", expected " + std::to_string(num_labels));
    }
    double last = 0.0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (e.id >= num_events) throw std::invalid_argument(where + "unknown event id " + std::to_string(e.id));
        if (i > 0 && e.id == kStartEvent) throw std::invalid_argument(where + "start marker inside sequence");
        if (!(e.time >= 0.0) || e.time < last) throw std::invalid_argument(where + "timestamps must be non-decreasing");
        last = e.time;
    }
    for (auto v : labels) {
        if (v > 1) throw std::invalid_argument(where + "label entries must be 0 or 1");
    }
}

std::size_t LocalGraph::num_edges() const {
    std::size_t n = 0;
    for (const auto& v : edges) n += v.size();
    return n;
}

void LocalGraph::validate(std::size_t context, std::size_t length) const {
    for (std::size_t j = 0; j < edges.size(); ++j) {
        std::set<std::size_t> positions;
        for (const auto& e : edges[j]) {
            if (!(e.cmi > 0.0)) throw std::invalid_argument("local edge with non-positive cmi");
            if (e.position < context || e.position + 1 >= length) {
                throw std::invalid_argument("local edge position " + std::to_string(e.position) + " out of range");
            }
            if (!positions.insert(e.position).second) {
                throw std::invalid_argument("two local edges share a (label, position)");
            }
        }
    }
}

std::size_t GlobalGraph::num_edges() const {
    std::size_t n = 0;
    for (const auto& p : parents) n += p.size();
    return n;
}

bool GlobalGraph::has_edge(LabelId label, EventId event) const {
    const auto& ps = parents.at(label);
    return std::any_of(ps.begin(), ps.end(), [event](const ParentStat& p) { return p.event == event; });
}

std::vector<EventId> GlobalGraph::parent_ids(LabelId label) const {
    std::vector<EventId> ids;
    for (const auto& p : parents.at(label)) ids.push_back(p.event);
    return ids;
}

}  // namespace cargo
