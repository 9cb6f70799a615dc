#include <algorithm>
#include <cmath>
#include <random>

#include "cargo/fusion.hpp"
#include "doctest.h"
#include "random_tally.hpp"

using namespace cargo;

namespace {

// A local graph with one positive label and the given (event, cmi) edges.
LocalGraph graph_with(SequenceId id, std::size_t labels, std::vector<LabelId> positive,
                      std::vector<std::tuple<LabelId, EventId, double>> edges) {
    LocalGraph g;
    g.sequence_id = id;
    g.positive_labels = std::move(positive);
    g.edges.resize(labels);
    std::size_t pos = 15;
    for (const auto& [j, e, cmi] : edges) g.edges[j].push_back({e, pos++, cmi, 0.1, 0.0, 0.0});
    return g;
}

// k of m positive sequences detect (label 0, event e).
EdgeTally bernoulli_tally(std::uint64_t m, const std::vector<std::pair<EventId, std::uint64_t>>& detections) {
    std::vector<LocalGraph> graphs;
    for (std::uint64_t s = 0; s < m; ++s) {
        std::vector<std::tuple<LabelId, EventId, double>> edges;
        for (const auto& [e, k] : detections) {
            if (s < k) edges.emplace_back(0, e, 0.1);
        }
        graphs.push_back(graph_with(s, 1, {0}, edges));
    }
    return tally(graphs, 1);
}

// Logistic threshold evaluated from scratch: quantiles by linear interpolation.
double reference_tau(const std::vector<double>& supports, double m, double tau_max = 0.5, double tau_min = 0.05) {
    auto sorted = supports;
    std::sort(sorted.begin(), sorted.end());
    auto q = [&](double p) {
        const double h = p * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    const double m0 = q(0.5);
    const double k = q(0.75) == q(0.25) ? 1.0 : 2.0 * std::log(3.0) / (std::log(q(0.75)) - std::log(q(0.25)));
    return (tau_max - tau_min) / (1.0 + std::exp(k * (std::log(m) - std::log(m0)))) + tau_min;
}

bool subset_of(const GlobalGraph& a, const GlobalGraph& b) {
    for (LabelId j = 0; j < a.num_labels(); ++j) {
        for (const auto& p : a.parents[j])
            if (!b.has_edge(j, p.event)) return false;
    }
    return true;
}

double beta_draw(std::mt19937_64& rng, double a, double b) {
    const double x = std::gamma_distribution<double>(a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(b, 1.0)(rng);
    return x / (x + y);
}

}  // namespace

TEST_CASE("tally counts positive sequences only") {
    std::vector<LocalGraph> graphs{
        graph_with(0, 2, {0}, {{0, 5, 0.2}}),
        graph_with(1, 2, {0}, {{0, 5, 0.4}}),
        graph_with(2, 2, {0}, {{0, 5, 0.3}, {0, 6, 0.1}}),
        graph_with(3, 2, {0}, {}),
        graph_with(4, 2, {}, {{0, 5, 0.9}, {1, 5, 0.9}}),  // label 0 negative here: ignored
    };
    const auto t = tally(graphs, 2);
    CHECK(t.support(0) == 4);
    CHECK(t.support(1) == 0);
    CHECK(t.total() == 5);
    CHECK(t.frequency(0, 5) == 0.75);
    CHECK(t.edges(0).at(5).count == 3);
    CHECK(t.edges(0).at(5).mean_mi() == doctest::Approx(0.3));
    CHECK(t.edges(1).empty());

    const auto g = fuse_union(t);
    CHECK(g.support == std::vector<std::uint64_t>{4, 0});
    CHECK(g.parents[1].empty());  // unsupported label carries nothing
    CHECK(g.parent_ids(0) == std::vector<EventId>{5, 6});
}

TEST_CASE("tally from sequences uses their labels") {
    std::vector<LocalGraph> graphs{graph_with(7, 1, {}, {{0, 2, 0.1}})};
    LabeledSequence s;
    s.id = 7;
    s.events = {{0, 0.0}};
    s.labels = {1};
    std::vector<LabeledSequence> seqs{s};
    const auto t = tally(graphs, seqs, 1);
    CHECK(t.support(0) == 1);
    CHECK(t.frequency(0, 2) == 1.0);
    seqs[0].id = 8;
    CHECK_THROWS_AS(tally(graphs, seqs, 1), std::invalid_argument);
}

TEST_CASE("tally merge is a commutative monoid") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 25; ++trial) {
        const auto graphs = cargo::testing::random_local_graphs(rng, 60, 4, 12);
        const auto whole = tally(graphs, 4);
        const std::size_t cut1 = rng() % graphs.size();
        const std::size_t cut2 = cut1 + rng() % (graphs.size() - cut1 + 1);
        const std::span<const LocalGraph> all(graphs);
        const auto a = tally(all.subspan(0, cut1), 4);
        const auto b = tally(all.subspan(cut1, cut2 - cut1), 4);
        const auto c = tally(all.subspan(cut2), 4);

        auto ab_c = a;
        ab_c.merge(b);
        ab_c.merge(c);
        auto bc = b;
        bc.merge(c);
        auto a_bc = a;
        a_bc.merge(bc);
        auto cba = c;
        cba.merge(b);
        cba.merge(a);
        CHECK(ab_c.same_as(whole));
        CHECK(a_bc.same_as(whole));
        CHECK(cba.same_as(whole));
        CHECK(fuse_union(cba) == fuse_union(whole));  // mean MI is order-free bit for bit

        auto with_identity = whole;
        with_identity.merge(EdgeTally{});
        CHECK(with_identity.same_as(whole));
        EdgeTally identity;
        identity.merge(whole);
        CHECK(identity.same_as(whole));
    }
}

TEST_CASE("union and frequency") {
    CHECK(fuse_union(EdgeTally(3)).num_edges() == 0);

    const auto t = bernoulli_tally(4, {{1, 3}, {2, 1}});  // frequencies 0.75 and 0.25
    CHECK(fuse_frequency(t, 0.8).num_edges() == 0);
    CHECK(fuse_frequency(t, 0.5).parent_ids(0) == std::vector<EventId>{1});
    CHECK(fuse_frequency(t, 0.75).parent_ids(0) == std::vector<EventId>{1});  // >= threshold
    CHECK(fuse_frequency(t, 0.0) == fuse_union(t));
    CHECK_THROWS(fuse_frequency(t, 1.5));

    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const auto r = tally(cargo::testing::random_local_graphs(rng, 80, 5, 10), 5);
        const auto u = fuse_union(r);
        CHECK(fuse_frequency(r, 0.0) == u);
        CHECK(fuse_bes_caig(r, 0.0, true) == u);
        CHECK(fuse_bes_caig(r, 0.0, false) == u);
        for (const char* name : {"frequency:0.3", "adaptive", "beta_fpr:0.05", "bes_mi:0.02", "caig:0.01"}) {
            CHECK(subset_of(fuse(r, Criterion::parse(name)), u));
        }
    }
}

TEST_CASE("Bernoulli detections converge to (1 - beta) pi + alpha (1 - pi)") {
    std::mt19937_64 rng(12);
    for (auto [alpha, power] : {std::pair{0.05, 0.8}, std::pair{0.1, 0.9}}) {
        for (std::uint64_t m : {100ULL, 1000ULL, 10000ULL}) {
            std::bernoulli_distribution real(power), spurious(alpha);
            std::uint64_t k_true = 0, k_false = 0;
            for (std::uint64_t s = 0; s < m; ++s) {
                k_true += real(rng);
                k_false += spurious(rng);
            }
            const auto t = bernoulli_tally(m, {{1, k_true}, {2, k_false}});
            const double sd_true = std::sqrt(power * (1 - power) / static_cast<double>(m));
            const double sd_false = std::sqrt(alpha * (1 - alpha) / static_cast<double>(m));
            CHECK(std::abs(t.frequency(0, 1) - power) <= 3 * sd_true);
            CHECK(std::abs(t.frequency(0, 2) - alpha) <= 3 * sd_false);
            if (m == 10000) CHECK(fuse_frequency(t, 0.5).parent_ids(0) == std::vector<EventId>{1});
        }
    }
}

TEST_CASE("adaptive threshold") {
    SUBCASE("midpoint and limits") {
        const std::vector<std::uint64_t> supports{10, 40, 100, 300, 1000};
        const auto fn = AdaptiveThreshold::fit(supports);
        CHECK(fn.m0 == 100.0);
        CHECK(std::abs(fn(fn.m0) - 0.275) <= 1e-12);
        CHECK(fn(1e12) == doctest::Approx(0.05).epsilon(1e-6));
        CHECK(fn(1e-12) == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(std::isfinite(fn(0.0)));
        CHECK(fn(0.0) <= 0.5);
    }
    SUBCASE("supports {10, 100, 1000} against direct evaluation") {
        const std::vector<std::uint64_t> supports{10, 100, 1000};
        const std::vector<double> as_double{10, 100, 1000};
        const auto fn = AdaptiveThreshold::fit(supports);
        // q25 = 55, q75 = 550, so k = 2 ln 3 / ln 10
        CHECK(fn.k == doctest::Approx(2.0 * std::log(3.0) / std::log(10.0)).epsilon(1e-14));
        for (double m : {10.0, 100.0, 1000.0}) {
            CHECK(std::abs(fn(m) - reference_tau(as_double, m)) <= 1e-14);
        }
        CHECK(fn(10.0) == doctest::Approx(0.05 + 0.45 / (1.0 + std::pow(10.0, -fn.k))));
    }
    SUBCASE("equal quartiles fall back to k = 1") {
        const std::vector<std::uint64_t> supports{50, 50, 50, 50};
        const auto fn = AdaptiveThreshold::fit(supports);
        CHECK(fn.k == 1.0);
        CHECK(fn(50.0) == doctest::Approx(0.275).epsilon(1e-12));
        CHECK(fn(100.0) == doctest::Approx(0.45 / 3.0 + 0.05).epsilon(1e-12));  // 1 / (1 + e^{ln 2})
    }
    SUBCASE("zero supports are ignored and all-zero throws") {
        const std::vector<std::uint64_t> supports{0, 10, 100, 1000, 0};
        CHECK(AdaptiveThreshold::fit(supports).m0 == 100.0);
        const std::vector<std::uint64_t> none{0, 0};
        CHECK_THROWS(AdaptiveThreshold::fit(none));
        CHECK(fuse_adaptive(EdgeTally(2)).num_edges() == 0);
    }
    SUBCASE("each label is cut at its own tau") {
        // label 0: m = 10 (tau near the top), label 1: m = 1000 (tau near the bottom)
        std::vector<LocalGraph> graphs;
        for (SequenceId s = 0; s < 1000; ++s) {
            std::vector<LabelId> positive{1};
            std::vector<std::tuple<LabelId, EventId, double>> edges;
            if (s < 10) positive.push_back(0);
            if (s < 3) edges.emplace_back(0, 4, 0.1);   // 0.3 at m = 10
            if (s < 150) edges.emplace_back(1, 4, 0.1); // 0.15 at m = 1000
            graphs.push_back(graph_with(s, 2, positive, edges));
        }
        const auto t = tally(graphs, 2);
        const auto g = fuse_adaptive(t);
        const auto fn = AdaptiveThreshold::fit(t.supports());
        REQUIRE(fn(10) > 0.3);
        REQUIRE(fn(1000) < 0.15);
        CHECK(g.parents[0].empty());
        CHECK(g.parent_ids(1) == std::vector<EventId>{4});
    }
}

TEST_CASE("beta mixture") {
    SUBCASE("separates Beta(2, 20) from Beta(20, 2)") {
        std::mt19937_64 rng(31);
        std::vector<double> x;
        std::vector<int> truth;
        for (int i = 0; i < 2000; ++i) {
            const bool high = i % 3 == 0;
            x.push_back(high ? beta_draw(rng, 20, 2) : beta_draw(rng, 2, 20));
            truth.push_back(high ? 1 : 0);
        }
        const auto mix = fit_beta_mixture(x);
        REQUIRE(mix.has_value());
        const int low = mix->low();
        int correct = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const bool says_low = mix->responsibility(x[i], low) >= 0.5;
            correct += says_low == (truth[i] == 0);
        }
        CHECK(correct / 2000.0 >= 0.99);
        CHECK(mix->weight[low] == doctest::Approx(2.0 / 3.0).epsilon(0.05));
        CHECK(mix->mean(low) == doctest::Approx(2.0 / 22.0).epsilon(0.1));
    }
    SUBCASE("degenerate inputs") {
        const std::vector<double> same(20, 0.4);
        CHECK_FALSE(fit_beta_mixture(same).has_value());
        const std::vector<double> few{0.1, 0.2, 0.8, 0.9, 0.5, 0.3, 0.7};
        CHECK_FALSE(fit_beta_mixture(few).has_value());
    }
    SUBCASE("fallback to frequency 0.5 when the fit is impossible") {
        const auto t = bernoulli_tally(4, {{1, 3}, {2, 1}});
        CHECK(fuse_beta_fpr(t, 0.05) == fuse_frequency(t, 0.5));
    }
    SUBCASE("smaller target FPR keeps no more edges") {
        std::mt19937_64 rng(5);
        std::vector<LocalGraph> graphs;
        for (SequenceId s = 0; s < 200; ++s) {
            std::vector<std::tuple<LabelId, EventId, double>> edges;
            for (EventId e = 1; e <= 60; ++e) {
                if (rng() % 4 == 0) edges.emplace_back(0, e, e <= 10 ? beta_draw(rng, 20, 3) : beta_draw(rng, 2, 25));
            }
            graphs.push_back(graph_with(s, 1, {0}, edges));
        }
        const auto t = tally(graphs, 1);
        std::size_t previous = 0;
        for (double fpr : {0.01, 0.05, 0.15, 0.2}) {
            const auto n = fuse_beta_fpr(t, fpr).num_edges();
            CHECK(n >= previous);
            previous = n;
        }
        const auto g = fuse_beta_fpr(t, 0.05);
        for (EventId e = 1; e <= 10; ++e) CHECK(g.has_edge(0, e));
        CHECK(g.num_edges() <= 14);
    }
}

TEST_CASE("estimate_mi") {
    const std::vector<double> at_marginal(5, 0.3);
    CHECK(estimate_mi(0.2, at_marginal, 0.3) == doctest::Approx(0.2).epsilon(1e-15));
    const std::vector<double> high(3, 0.9);
    CHECK(estimate_mi(0.0, high, 0.5) == doctest::Approx(0.36806).epsilon(1e-5));
    CHECK(std::isfinite(estimate_mi(0.1, high, 0.0)));
    CHECK(std::isfinite(estimate_mi(0.1, high, 1.0)));
}

TEST_CASE("CAIG and BES-MI") {
    SUBCASE("penalty arithmetic") {
        CHECK(parent_penalty(0.01, 1000, 100, true) == doctest::Approx(0.01 * std::log(11.0)).epsilon(1e-14));
        CHECK(parent_penalty(0.01, 1000, 100, true) == doctest::Approx(0.02398).epsilon(1e-3));
        CHECK(parent_penalty(0.01, 1000, 100, false) == 0.01);
    }
    SUBCASE("m_total = 1000, m_j = 100: MI 0.05 kept, 0.01 removed") {
        std::vector<LocalGraph> graphs;
        for (SequenceId s = 0; s < 1000; ++s) {
            if (s < 100) {
                graphs.push_back(graph_with(s, 1, {0}, {{0, 1, 0.05}, {0, 2, 0.01}}));
            } else {
                graphs.push_back(graph_with(s, 1, {}, {}));
            }
        }
        const auto t = tally(graphs, 1);
        REQUIRE(t.total() == 1000);
        CHECK(fuse_bes_caig(t, 0.01, true).parent_ids(0) == std::vector<EventId>{1});
        CHECK(fuse_bes_caig(t, 0.02, false).parent_ids(0) == std::vector<EventId>{1});
        CHECK(fuse_bes_caig(t, 0.06, false).num_edges() == 0);
    }
    SUBCASE("two visiting orders give the same graph") {
        std::mt19937_64 rng(41);
        const auto t = tally(cargo::testing::random_local_graphs(rng, 200, 6, 15), 6);
        std::vector<std::pair<LabelId, EventId>> order;
        for (LabelId j = 0; j < 6; ++j) {
            for (const auto& [e, counts] : t.edges(j)) order.emplace_back(j, e);
        }
        auto reversed = order;
        std::reverse(reversed.begin(), reversed.end());
        std::shuffle(order.begin(), order.end(), rng);
        CHECK(fuse_bes_caig(t, 0.02, true, order) == fuse_bes_caig(t, 0.02, true, reversed));
        CHECK(fuse_bes_caig(t, 0.02, false, order) == fuse_bes_caig(t, 0.02, false, reversed));
    }
}

TEST_CASE("criterion parsing") {
    CHECK(Criterion::parse("union").kind == CriterionKind::Union);
    const auto f = Criterion::parse("frequency:0.25");
    CHECK(f.kind == CriterionKind::Frequency);
    CHECK(f.tau == 0.25);
    CHECK(f.label() == "frequency:0.25");
    const auto a = Criterion::parse("adaptive:0.6:0.1");
    CHECK(a.tau_max == 0.6);
    CHECK(a.tau_min == 0.1);
    CHECK(Criterion::parse("caig:0.02").alpha_reg == 0.02);
    CHECK(Criterion::parse("beta_fpr:0.15").fpr == 0.15);
    CHECK(criterion_names().size() == 6);
    try {
        Criterion::parse("majority");
        FAIL("expected an error");
    } catch (const std::invalid_argument& e) {
        const std::string what = e.what();
        for (const auto& name : criterion_names()) CHECK(what.find(name) != std::string::npos);
    }
    CHECK_THROWS(Criterion::parse("frequency:abc"));
    CHECK_THROWS(Criterion::parse("union:0.5"));
    CHECK_THROWS(Criterion::parse("frequency:2").validate());
    CHECK_THROWS(Criterion::parse("adaptive:0.1:0.5").validate());
}
