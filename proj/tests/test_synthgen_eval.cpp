#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cargo/eval.hpp"
#include "cargo/fusion.hpp"
#include "cargo/oracle_estimator.hpp"
#include "cargo/world.hpp"
#include "doctest.h"

using namespace cargo;

namespace {

std::vector<std::uint64_t> supports_of(const Corpus& corpus, std::size_t labels) {
    std::vector<std::uint64_t> m(labels, 0);
    for (const auto& s : corpus.sequences) {
        for (std::size_t j = 0; j < labels; ++j) m[j] += s.labels[j];
    }
    return m;
}

GlobalGraph graph_from(const std::vector<std::vector<EventId>>& parents, const std::vector<std::uint64_t>& support) {
    GlobalGraph g(parents.size());
    g.support = support;
    for (std::size_t j = 0; j < parents.size(); ++j) {
        for (auto e : parents[j]) g.parents[j].push_back({e, 1.0, support[j], 0.1});
    }
    return g;
}

}  // namespace

TEST_CASE("generate: labels follow the rules") {
    GeneratorSpec spec;
    spec.name = "always-a";
    spec.num_events = 3;
    spec.length = 5;
    spec.transition.assign(4, {0.0, 1.0, 0.0, 0.0});
    spec.rules = {LabelRule{{1}, {}}, LabelRule{{2}, {}}, LabelRule{{1}, {3}}};
    const auto corpus = generate(spec, 20);
    for (const auto& s : corpus.sequences) {
        CHECK(s.labels == std::vector<std::uint8_t>{1, 0, 1});
        CHECK(s.events.size() == 5);
        CHECK_NOTHROW(s.validate(spec.vocab_size(), 3));
    }
    CHECK(corpus.truth == GroundTruth{{1}, {2}, {1, 3}});
}

TEST_CASE("generate: spec validation") {
    auto spec = preset("tiny", 0);
    SUBCASE("contradictory rule") {
        spec.rules = {LabelRule{{1}, {1}}};
        CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    }
    SUBCASE("row does not sum to one") {
        spec.transition[2][1] += 1e-9;
        CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    }
    SUBCASE("rule needs a positive literal") {
        spec.rules = {LabelRule{{}, {2}}};
        CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    }
    SUBCASE("unknown event") {
        spec.rules = {LabelRule{{9}, {}}};
        CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    }
    SUBCASE("m must be positive") { CHECK_THROWS(generate(spec, 0)); }
}

TEST_CASE("presets") {
    const auto tiny = preset("tiny");
    CHECK(tiny.num_events == 4);
    CHECK(tiny.length == 6);
    CHECK(tiny.num_labels() == 1);
    const auto literals = tiny.rules[0].positive.size() + tiny.rules[0].negated.size();
    CHECK(literals >= 1);
    CHECK(literals <= 2);
    // completions of a length-1 prefix: num_events^(length - 1)
    CHECK(std::pow(static_cast<double>(tiny.num_events), static_cast<double>(tiny.length - 1)) <= 1024.0);

    for (const char* name : {"standard", "longtail"}) {
        const auto spec = preset(name);
        CHECK(spec.num_events == 200);
        CHECK(spec.length == 50);
        CHECK(spec.num_labels() == 20);
        for (const auto& r : spec.rules) {
            const auto n = r.positive.size() + r.negated.size();
            CHECK(n >= 3);
            CHECK(n <= 8);
        }
    }
    CHECK(preset("standard", 1).rules == preset("longtail", 2).rules);
    CHECK_THROWS_AS(preset("huge"), std::invalid_argument);
}

TEST_CASE("standard: every rule is satisfiable (10^4 rollouts)") {
    const auto spec = preset("standard", 13);
    const auto corpus = generate(spec, 10000, 2);
    const auto m = supports_of(corpus, spec.num_labels());
    for (std::size_t j = 0; j < m.size(); ++j) {
        INFO("label " << j);
        CHECK(m[j] > 0);
    }
}

TEST_CASE("longtail: supports span two orders of magnitude at m = 5000") {
    const auto spec = preset("longtail", 0);
    const auto corpus = generate(spec, 5000, 2);
    const auto m = supports_of(corpus, spec.num_labels());
    const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
    CHECK(static_cast<double>(*hi) >= 100.0 * static_cast<double>(std::max<std::uint64_t>(*lo, 1)));
    CHECK(m.front() > m.back());
}

TEST_CASE("generate is reproducible and worker independent") {
    const auto spec = preset("standard", 5);
    const auto a = generate(spec, 64, 1);
    const auto b = generate(spec, 64, 4);
    CHECK(a.sequences == b.sequences);
    CHECK(generate(preset("standard", 6), 64, 1).sequences != a.sequences);
    for (std::size_t k = 0; k < a.sequences.size(); ++k) CHECK(a.sequences[k].id == k);
}

TEST_CASE("score: arithmetic and conventions") {
    SUBCASE("perfect prediction") {
        const GroundTruth truth{{1, 2}, {3}};
        const auto r = score(graph_from({{1, 2}, {3}}, {5, 7}), truth);
        CHECK(r.weighted.precision == 1.0);
        CHECK(r.weighted.recall == 1.0);
        CHECK(r.weighted.f1 == 1.0);
        CHECK(r.macro.f1 == 1.0);
    }
    SUBCASE("{A, B} against {B, C}") {
        const auto r = score(graph_from({{1, 2}}, {4}), GroundTruth{{2, 3}});
        CHECK(r.labels[0].precision == 0.5);
        CHECK(r.labels[0].recall == 0.5);
        CHECK(r.labels[0].f1 == 0.5);
        CHECK(r.labels[0].true_positives == 1);
    }
    SUBCASE("supports 90 / 10 with F1 1 / 0") {
        const auto r = score(graph_from({{1}, {}}, {90, 10}), GroundTruth{{1}, {2}});
        CHECK(r.weighted.f1 == doctest::Approx(0.9));
        CHECK(r.macro.f1 == doctest::Approx(0.5));
    }
    SUBCASE("empty prediction and empty truth") {
        const auto r = score(graph_from({{}, {}, {4}}, {3, 3, 3}), GroundTruth{{1}, {}, {}});
        CHECK(r.labels[0].precision == 0.0);
        CHECK(r.labels[0].recall == 0.0);
        CHECK(r.labels[0].f1 == 0.0);
        CHECK(r.labels[1].precision == 1.0);
        CHECK(r.labels[1].recall == 1.0);
        CHECK(r.labels[2].precision == 0.0);
        CHECK(r.labels[2].recall == 1.0);
    }
    SUBCASE("labels without support are left out of both averages") {
        const auto r = score(graph_from({{1}, {}}, {10, 0}), GroundTruth{{1}, {2}});
        CHECK(r.weighted.f1 == 1.0);
        CHECK(r.macro.f1 == 1.0);
    }
    SUBCASE("graph with more labels than the truth") {
        CHECK_THROWS(score(graph_from({{1}, {2}}, {1, 1}), GroundTruth{{1}}));
    }
}

TEST_CASE("score is permutation invariant, weighted = macro for equal supports") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t labels = 2 + rng() % 6;
        std::vector<std::vector<EventId>> pred(labels), truth(labels);
        std::vector<std::uint64_t> support(labels);
        for (std::size_t j = 0; j < labels; ++j) {
            for (EventId e = 1; e <= 8; ++e) {
                if (rng() % 3 == 0) pred[j].push_back(e);
                if (rng() % 3 == 0) truth[j].push_back(e);
            }
            support[j] = 1 + rng() % 50;
        }
        const auto r = score(graph_from(pred, support), truth);

        std::vector<std::size_t> perm(labels);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::vector<EventId>> p2(labels), t2(labels);
        std::vector<std::uint64_t> s2(labels);
        for (std::size_t j = 0; j < labels; ++j) {
            p2[j] = pred[perm[j]];
            t2[j] = truth[perm[j]];
            s2[j] = support[perm[j]];
        }
        auto g2 = graph_from(p2, s2);
        for (auto& ps : g2.parents) std::reverse(ps.begin(), ps.end());  // edge order too
        const auto r2 = score(g2, t2);
        CHECK(r2.weighted.f1 == doctest::Approx(r.weighted.f1).epsilon(1e-12));
        CHECK(r2.macro.f1 == doctest::Approx(r.macro.f1).epsilon(1e-12));
        CHECK(r2.weighted.precision == doctest::Approx(r.weighted.precision).epsilon(1e-12));

        const auto flat = score(graph_from(pred, std::vector<std::uint64_t>(labels, 7)), truth);
        CHECK(flat.weighted.f1 == doctest::Approx(flat.macro.f1).epsilon(1e-12));
        CHECK(flat.weighted.recall == doctest::Approx(flat.macro.recall).epsilon(1e-12));
        for (const auto& s : r.labels) {
            CHECK(s.precision >= 0.0);
            CHECK(s.precision <= 1.0);
            CHECK(s.f1 <= 1.0);
        }
    }
}

TEST_CASE("sweep") {
    const auto spec = preset("standard", 21);
    const auto corpus = generate(spec, 400, 1);
    const OracleEstimator oracle(spec);
    OneShotConfig cfg;
    const std::vector<Criterion> criteria{Criterion::parse("union"), Criterion::parse("frequency:0")};
    const std::vector<std::uint64_t> grid{50, 100, 200, 400};
    const auto rows = sweep(oracle, corpus.sequences, corpus.truth, cfg, 3, 1, criteria, grid);
    REQUIRE(rows.size() == grid.size() * criteria.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& u = rows[2 * i];
        const auto& f = rows[2 * i + 1];
        CHECK(u.m == grid[i]);
        CHECK(f.m == grid[i]);
        CHECK(u.criterion == "union");
        CHECK(u.report.labels.size() == f.report.labels.size());
        CHECK(u.report.weighted.f1 == f.report.weighted.f1);
        CHECK(u.report.macro.f1 == f.report.macro.f1);
        if (i > 0) CHECK(u.report.weighted.recall >= rows[2 * (i - 1)].report.weighted.recall - 0.02);
    }
    const auto csv = sweep_csv_header("N") + sweep_csv(rows, "N", "68");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + static_cast<long>(rows.size()));
    CHECK(csv.rfind("N,m,criterion,weighted_precision", 0) == 0);
    CHECK(csv.find("\n68,50,union,") != std::string::npos);
    CHECK_THROWS(sweep(oracle, corpus.sequences, corpus.truth, cfg, 3, 1, criteria, {401}));
}
