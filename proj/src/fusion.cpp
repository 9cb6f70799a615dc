#include "cargo/fusion.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <boost/math/distributions/beta.hpp>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "cargo/info.hpp"

namespace cargo {

double EdgeCounts::mean_mi() const {
    if (mi.empty()) return 0.0;
    std::vector<double> sorted = mi;
    std::sort(sorted.begin(), sorted.end());
    return mean_of(sorted);
}

double EdgeTally::frequency(LabelId j, EventId e) const {
    const auto m = support_.at(j);
    if (m == 0) return 0.0;
    const auto it = edges_.at(j).find(e);
    return it == edges_.at(j).end() ? 0.0 : static_cast<double>(it->second.count) / static_cast<double>(m);
}

void EdgeTally::add(const LocalGraph& graph, std::span<const LabelId> positive) {
    if (graph.edges.size() != num_labels()) {
        throw std::invalid_argument("local graph for sequence " + std::to_string(graph.sequence_id) + " has " +
                                    std::to_string(graph.edges.size()) + " label slots, expected " +
                                    std::to_string(num_labels()));
    }
    ++total_;
    for (LabelId j : positive) {
        if (j >= num_labels()) throw std::invalid_argument("positive label id out of range: " + std::to_string(j));
        ++support_[j];
        for (const auto& edge : graph.edges[j]) {
            auto& slot = edges_[j][edge.event];
            ++slot.count;
            slot.mi.push_back(edge.mi());
        }
    }
}

void EdgeTally::merge(const EdgeTally& other) {
    if (num_labels() == 0 && total_ == 0) {
        *this = other;
        return;
    }
    if (other.num_labels() == 0 && other.total_ == 0) return;
    if (other.num_labels() != num_labels()) throw std::invalid_argument("cannot merge tallies over different label sets");
    total_ += other.total_;
    for (std::size_t j = 0; j < num_labels(); ++j) {
        support_[j] += other.support_[j];
        for (const auto& [e, c] : other.edges_[j]) {
            auto& slot = edges_[j][e];
            slot.count += c.count;
            slot.mi.insert(slot.mi.end(), c.mi.begin(), c.mi.end());
        }
    }
}

bool EdgeTally::same_as(const EdgeTally& other) const {
    if (support_ != other.support_ || total_ != other.total_) return false;
    for (std::size_t j = 0; j < num_labels(); ++j) {
        const auto& a = edges_[j];
        const auto& b = other.edges_[j];
        if (a.size() != b.size()) return false;
        for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
            if (ia->first != ib->first || ia->second.count != ib->second.count) return false;
            auto x = ia->second.mi;
            auto y = ib->second.mi;
            std::sort(x.begin(), x.end());
            std::sort(y.begin(), y.end());
            if (x != y) return false;
        }
    }
    return true;
}

EdgeTally tally(std::span<const LocalGraph> graphs, std::size_t num_labels) {
    EdgeTally t(num_labels);
    for (const auto& g : graphs) t.add(g);
    return t;
}

EdgeTally tally(std::span<const LocalGraph> graphs, std::span<const LabeledSequence> sequences, std::size_t num_labels) {
    std::unordered_map<SequenceId, const LabeledSequence*> by_id;
    for (const auto& s : sequences) by_id.emplace(s.id, &s);
    EdgeTally t(num_labels);
    for (const auto& g : graphs) {
        const auto it = by_id.find(g.sequence_id);
        if (it == by_id.end()) {
            throw std::invalid_argument("local graph refers to unknown sequence id " + std::to_string(g.sequence_id));
        }
        t.add(g, it->second->positive_labels());
    }
    return t;
}

// ---------------------------------------------------------------------------
// adaptive threshold

double quantile_linear(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

AdaptiveThreshold AdaptiveThreshold::fit(std::span<const std::uint64_t> supports, double tau_max, double tau_min) {
    if (!(tau_min >= 0.0 && tau_min <= tau_max && tau_max <= 1.0)) {
        throw std::invalid_argument("adaptive threshold needs 0 <= tau_min <= tau_max <= 1");
    }
    std::vector<double> positive;
    for (auto m : supports) {
        if (m > 0) positive.push_back(static_cast<double>(m));
    }
    if (positive.empty()) throw std::invalid_argument("adaptive threshold needs at least one label with support");
    AdaptiveThreshold fn;
    fn.tau_max = tau_max;
    fn.tau_min = tau_min;
    fn.m0 = quantile_linear(positive, 0.5);
    const double q25 = quantile_linear(positive, 0.25);
    const double q75 = quantile_linear(positive, 0.75);
    const double spread = std::log(q75) - std::log(q25);
    fn.k = spread > 0.0 ? 2.0 * std::log(3.0) / spread : 1.0;
    return fn;
}

double AdaptiveThreshold::operator()(double m) const {
    // The guard keeps m = 0 finite without moving tau(m0) off the exact midpoint.
    const double x = k * (std::log(std::max(m, 1e-9)) - std::log(m0));
    return (tau_max - tau_min) / (1.0 + std::exp(x)) + tau_min;
}

// ---------------------------------------------------------------------------
// beta mixture

namespace {

double beta_log_pdf(double x, double a, double b) {
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

// Method-of-moments Beta parameters; nullopt when the variance is not usable.
std::optional<std::pair<double, double>> beta_moments(double mean, double var) {
    if (!(var > 0.0) || !(mean > 0.0 && mean < 1.0)) return std::nullopt;
    const double common = mean * (1.0 - mean) / var - 1.0;
    if (!(common > 0.0)) return std::nullopt;
    return std::make_pair(mean * common, (1.0 - mean) * common);
}

constexpr double kBetaEdge = 1e-9;

}  // namespace

double BetaMixture::responsibility(double x, int c) const {
    x = std::clamp(x, kBetaEdge, 1.0 - kBetaEdge);
    const double l0 = std::log(weight[0]) + beta_log_pdf(x, a[0], b[0]);
    const double l1 = std::log(weight[1]) + beta_log_pdf(x, a[1], b[1]);
    const double top = std::max(l0, l1);
    const double r0 = std::exp(l0 - top) / (std::exp(l0 - top) + std::exp(l1 - top));
    return c == 0 ? r0 : 1.0 - r0;
}

std::optional<BetaMixture> fit_beta_mixture(std::span<const double> values) {
    if (values.size() < 8) return std::nullopt;
    std::vector<double> x(values.begin(), values.end());
    for (double& v : x) v = std::clamp(v, kBetaEdge, 1.0 - kBetaEdge);
    std::sort(x.begin(), x.end());
    if (x.front() == x.back()) return std::nullopt;
    const std::size_t n = x.size();

    BetaMixture mix;
    const std::size_t half = n / 2;
    for (int c = 0; c < 2; ++c) {
        std::span<const double> part = c == 0 ? std::span<const double>(x).first(half) : std::span<const double>(x).subspan(half);
        const double mu = mean_of(part);
        const double sd = sample_stddev(part, mu);
        // A constant half still needs a proper start; give it a narrow spread.
        auto ab = beta_moments(mu, sd > 0.0 ? sd * sd : 1e-4 * mu * (1.0 - mu));
        if (!ab) return std::nullopt;
        mix.a[c] = ab->first;
        mix.b[c] = ab->second;
    }

    std::vector<double> resp(n);
    double previous = -std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= 200; ++iter) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double l0 = std::log(mix.weight[0]) + beta_log_pdf(x[i], mix.a[0], mix.b[0]);
            const double l1 = std::log(mix.weight[1]) + beta_log_pdf(x[i], mix.a[1], mix.b[1]);
            const double top = std::max(l0, l1);
            const double s = std::exp(l0 - top) + std::exp(l1 - top);
            resp[i] = std::exp(l0 - top) / s;
            ll += top + std::log(s);
        }
        mix.iterations = iter;
        mix.log_likelihood = ll;
        if (!std::isfinite(ll)) return std::nullopt;
        if (std::abs(ll - previous) < 1e-8) break;
        previous = ll;

        for (int c = 0; c < 2; ++c) {
            double w = 0.0, s1 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = c == 0 ? resp[i] : 1.0 - resp[i];
                w += r;
                s1 += r * x[i];
            }
            if (w <= 1e-12) return std::nullopt;  // a component emptied out
            const double mu = s1 / w;
            double s2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = c == 0 ? resp[i] : 1.0 - resp[i];
                s2 += r * (x[i] - mu) * (x[i] - mu);
            }
            auto ab = beta_moments(mu, s2 / w);
            if (!ab) return std::nullopt;
            mix.weight[c] = w / static_cast<double>(n);
            mix.a[c] = ab->first;
            mix.b[c] = ab->second;
        }
    }
    return mix;
}

// ---------------------------------------------------------------------------
// criteria

double estimate_mi(double cmi, std::span<const double> posterior_samples, double label_marginal) {
    return cmi + context_information(posterior_samples, label_marginal);
}

double parent_penalty(double alpha_reg, std::uint64_t m_total, std::uint64_t m_j, bool use_imbalance) {
    if (!use_imbalance) return alpha_reg;
    if (m_j == 0) throw std::invalid_argument("penalty undefined for a label without support");
    return alpha_reg * std::log(static_cast<double>(m_total) / static_cast<double>(m_j) + 1.0);
}

namespace {

template <typename Keep>
GlobalGraph select(const EdgeTally& tally, Keep keep) {
    GlobalGraph g(tally.num_labels());
    for (LabelId j = 0; j < tally.num_labels(); ++j) {
        const auto m = tally.support(j);
        g.support[j] = m;
        if (m == 0) continue;
        for (const auto& [e, c] : tally.edges(j)) {
            ParentStat p{e, static_cast<double>(c.count) / static_cast<double>(m), m, c.mean_mi()};
            if (keep(j, p)) g.parents[j].push_back(p);
        }
    }
    return g;
}

}  // namespace

GlobalGraph fuse_union(const EdgeTally& tally) {
    return select(tally, [](LabelId, const ParentStat& p) { return p.frequency > 0.0; });
}

GlobalGraph fuse_frequency(const EdgeTally& tally, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("frequency threshold must lie in [0, 1]");
    return select(tally, [tau](LabelId, const ParentStat& p) { return p.frequency > 0.0 && p.frequency >= tau; });
}

GlobalGraph fuse_adaptive(const EdgeTally& tally, double tau_max, double tau_min) {
    const auto& supports = tally.supports();
    if (std::none_of(supports.begin(), supports.end(), [](auto m) { return m > 0; })) {
        spdlog::warn("adaptive fusion: no label has positive support, returning an empty graph");
        return GlobalGraph(tally.num_labels());
    }
    const auto fn = AdaptiveThreshold::fit(supports, tau_max, tau_min);
    std::vector<double> tau(tally.num_labels());
    for (LabelId j = 0; j < tally.num_labels(); ++j) tau[j] = fn(static_cast<double>(supports[j]));
    return select(tally, [&](LabelId j, const ParentStat& p) { return p.frequency >= tau[j]; });
}

GlobalGraph fuse_beta_fpr(const EdgeTally& tally, double target_fpr) {
    if (!(target_fpr > 0.0 && target_fpr < 1.0)) throw std::invalid_argument("target FPR must lie in (0, 1)");
    const GlobalGraph all = fuse_union(tally);
    std::vector<double> mi;
    double top = 0.0;
    for (const auto& ps : all.parents) {
        for (const auto& p : ps) {
            mi.push_back(p.mi);
            top = std::max(top, p.mi);
        }
    }
    std::optional<BetaMixture> mix;
    if (top > 0.0) {
        std::vector<double> scaled;
        for (double v : mi) scaled.push_back(v / (1.05 * top));
        mix = fit_beta_mixture(scaled);
    }
    if (!mix) {
        spdlog::warn("beta_fpr fusion: {} MI values are too few or degenerate for a mixture fit, using frequency >= 0.5",
                     mi.size());
        return fuse_frequency(tally, 0.5);
    }
    const int low = mix->low();
    const boost::math::beta_distribution<double> spurious(mix->a[low], mix->b[low]);
    const double cut = boost::math::quantile(spurious, 1.0 - target_fpr);
    spdlog::debug("beta_fpr fusion: spurious Beta({:.4g}, {:.4g}) weight {:.3f}, cut {:.4g}", mix->a[low], mix->b[low],
                  mix->weight[low], cut);
    return select(tally, [&](LabelId, const ParentStat& p) { return p.mi / (1.05 * top) >= cut; });
}

GlobalGraph fuse_bes_caig(const EdgeTally& tally, double alpha_reg, bool use_imbalance,
                          const std::vector<std::pair<LabelId, EventId>>& order) {
    if (!(alpha_reg >= 0.0)) throw std::invalid_argument("alpha_reg must be non-negative");
    GlobalGraph g = fuse_union(tally);
    std::vector<std::pair<LabelId, EventId>> visit = order;
    if (visit.empty()) {
        for (LabelId j = 0; j < g.num_labels(); ++j) {
            for (const auto& p : g.parents[j]) visit.emplace_back(j, p.event);
        }
    }
    std::vector<double> penalty(g.num_labels(), 0.0);
    for (LabelId j = 0; j < g.num_labels(); ++j) {
        if (g.support[j] > 0) penalty[j] = parent_penalty(alpha_reg, tally.total(), g.support[j], use_imbalance);
    }
    // The score is a sum of per-parent terms (MI - penalty), so the change from
    // dropping one parent never depends on which other parents remain.
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& [j, e] : visit) {
            if (j >= g.num_labels()) throw std::invalid_argument("edge order refers to an unknown label");
            auto& ps = g.parents[j];
            auto it = std::find_if(ps.begin(), ps.end(), [e = e](const ParentStat& p) { return p.event == e; });
            if (it == ps.end()) continue;
            const double delta = penalty[j] - it->mi;
            if (delta >= 0.0) {
                ps.erase(it);
                changed = true;
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// criterion selection

const std::vector<std::string>& criterion_names() {
    static const std::vector<std::string> names{"union", "frequency", "adaptive", "beta_fpr", "bes_mi", "caig"};
    return names;
}

CriterionKind criterion_kind(const std::string& name) {
    const auto& names = criterion_names();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        std::string all;
        for (const auto& n : names) all += (all.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown criterion '" + name + "' (valid: " + all + ")");
    }
    return static_cast<CriterionKind>(it - names.begin());
}

std::string criterion_name(CriterionKind kind) { return criterion_names().at(static_cast<std::size_t>(kind)); }

Criterion Criterion::parse(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.empty()) throw std::invalid_argument("empty criterion");
    Criterion c;
    c.kind = criterion_kind(parts[0]);
    auto number = [&](std::size_t i) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(parts[i], &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != parts[i].size() || parts[i].empty()) {
            throw std::invalid_argument("bad number '" + parts[i] + "' in criterion '" + text + "'");
        }
        return v;
    };
    std::size_t max_args = 0;
    switch (c.kind) {
        case CriterionKind::Union: max_args = 0; break;
        case CriterionKind::Frequency: max_args = 1; if (parts.size() > 1) c.tau = number(1); break;
        case CriterionKind::Adaptive:
            max_args = 2;
            if (parts.size() > 1) c.tau_max = number(1);
            if (parts.size() > 2) c.tau_min = number(2);
            break;
        case CriterionKind::BetaFpr: max_args = 1; if (parts.size() > 1) c.fpr = number(1); break;
        case CriterionKind::BesMi:
        case CriterionKind::Caig: max_args = 1; if (parts.size() > 1) c.alpha_reg = number(1); break;
    }
    if (parts.size() > max_args + 1) throw std::invalid_argument("too many parameters in criterion '" + text + "'");
    c.validate();
    return c;
}

std::string Criterion::label() const {
    auto num = [](double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    };
    switch (kind) {
        case CriterionKind::Union: return "union";
        case CriterionKind::Frequency: return "frequency:" + num(tau);
        case CriterionKind::Adaptive: return "adaptive:" + num(tau_max) + ":" + num(tau_min);
        case CriterionKind::BetaFpr: return "beta_fpr:" + num(fpr);
        case CriterionKind::BesMi: return "bes_mi:" + num(alpha_reg);
        case CriterionKind::Caig: return "caig:" + num(alpha_reg);
    }
    return "?";
}

void Criterion::validate() const {
    switch (kind) {
        case CriterionKind::Frequency:
            if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
            break;
        case CriterionKind::Adaptive:
            if (!(tau_min >= 0.0 && tau_min <= tau_max && tau_max <= 1.0)) {
                throw std::invalid_argument("adaptive needs 0 <= tau_min <= tau_max <= 1");
            }
            break;
        case CriterionKind::BetaFpr:
            if (!(fpr > 0.0 && fpr < 1.0)) throw std::invalid_argument("fpr must lie in (0, 1)");
            break;
        case CriterionKind::BesMi:
        case CriterionKind::Caig:
            if (!(alpha_reg >= 0.0)) throw std::invalid_argument("alpha_reg must be non-negative");
            break;
        case CriterionKind::Union: break;
    }
}

GlobalGraph fuse(const EdgeTally& tally, const Criterion& criterion) {
    criterion.validate();
    switch (criterion.kind) {
        case CriterionKind::Union: return fuse_union(tally);
        case CriterionKind::Frequency: return fuse_frequency(tally, criterion.tau);
        case CriterionKind::Adaptive: return fuse_adaptive(tally, criterion.tau_max, criterion.tau_min);
        case CriterionKind::BetaFpr: return fuse_beta_fpr(tally, criterion.fpr);
        case CriterionKind::BesMi: return fuse_bes_caig(tally, criterion.alpha_reg, false);
        case CriterionKind::Caig: return fuse_bes_caig(tally, criterion.alpha_reg, true);
    }
    throw std::logic_error("unhandled criterion");
}

}  // namespace cargo
