#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "nestedheat/graph_metric.hpp"
#include "test_support.hpp"

using namespace nh;
using nhtest::gasket;
using nhtest::snowflake;

TEST_SUITE("graph_metric") {

TEST_CASE("cell graph structure for the gasket") {
    const CellGraph g = build_cell_graph(gasket(), 0, 2);
    CHECK(g.cells.size() == 9);
    CHECK(g.verts.size() == 15);
    // adjacency is symmetric, irreflexive, and matches shared vertices
    for (std::size_t c = 0; c < g.adj.size(); ++c) {
        for (int n : g.adj[c]) {
            CHECK(n != static_cast<int>(c));
            const auto& back = g.adj[static_cast<std::size_t>(n)];
            CHECK(std::find(back.begin(), back.end(), static_cast<int>(c)) != back.end());
        }
        CHECK(std::is_sorted(g.adj[c].begin(), g.adj[c].end()));
    }
    // each junction vertex makes its two incident cells adjacent
    for (std::size_t v = 0; v < g.incident.size(); ++v) {
        const auto& inc = g.incident[v];
        for (std::size_t i = 0; i < inc.size(); ++i)
            for (std::size_t j = i + 1; j < inc.size(); ++j) {
                const auto& a = g.adj[static_cast<std::size_t>(inc[i])];
                CHECK(std::find(a.begin(), a.end(), inc[j]) != a.end());
            }
    }
}

TEST_CASE("chain distance examples") {
    const auto& sys = gasket();
    CHECK(d_M(sys, {0.3, 0.0}, {0.3, 0.0}, 0, 2).d == 0);
    CHECK(d_M(sys, {0.0, 0.0}, {1.0, 0.0}, 0, 2).d == 1);   // one shared cell
    CHECK(d_M(sys, {0.0, 0.0}, {2.0, 0.0}, 0, 2).d == 2);
    CHECK(d_M(sys, {0.1, 0.0}, {3.9, 0.0}, 0, 2).d == 4);
    CHECK(d_M(sys, {0.1, 0.0}, {3.9, 0.0}, -1, 2).d == 8);  // finer chains are longer
}

TEST_CASE("chain distance is a metric") {
    const auto& sys = gasket();
    const CellGraph g = build_cell_graph(sys, 0, 2);
    Rng rng(61);
    for (int i = 0; i < 40; ++i) {
        const Vec2 x = sys.pow_L(2) * sample_point(sys, -2, 5, rng);
        const Vec2 y = sys.pow_L(2) * sample_point(sys, -2, 5, rng);
        const Vec2 z = sys.pow_L(2) * sample_point(sys, -2, 5, rng);
        const int dxy = d_M(sys, g, x, y).d;
        const int dyx = d_M(sys, g, y, x).d;
        CHECK(dxy == dyx);
        // chains through z concatenate, so the plain triangle inequality holds
        CHECK(dxy <= d_M(sys, g, x, z).d + d_M(sys, g, z, y).d);
        if (dist(x, y) > 1e-12) CHECK(dxy >= 1);
    }
}

TEST_CASE("chain distance is scale-equivariant") {
    const auto& sys = gasket();
    Rng rng(67);
    for (int i = 0; i < 20; ++i) {
        const Vec2 x = sys.pow_L(2) * sample_point(sys, -2, 5, rng);
        const Vec2 y = sys.pow_L(2) * sample_point(sys, -2, 5, rng);
        const int d0 = d_M(sys, x, y, 0, 2).d;
        const int d1 = d_M(sys, sys.L() * x, sys.L() * y, 1, 3).d;
        CHECK(d0 == d1);
    }
}

TEST_CASE("frontier cap reports a lower bound") {
    const auto& sys = gasket();
    const MetricResult r = d_M(sys, {0.1, 0.0}, {3.9, 0.0}, -1, 2, 4);
    CHECK(r.lower_bound);
    CHECK(r.d >= 1);
    CHECK(r.d <= 8);
}

TEST_CASE("growth constants are positive and certified with margin") {
    const auto& sys = gasket();
    const GrowthConstants gc = growth_constants(sys, {-1, 0, 1}, 60, 99);
    CHECK(gc.c17_hat > 0);
    CHECK(gc.c18_hat > 0);
    CHECK(gc.c17_cert == doctest::Approx(gc.c17_hat / 1.5));
    CHECK(gc.c18_cert == doctest::Approx(gc.c18_hat * 1.5));
    REQUIRE(gc.per_M_c17.size() == 3);
    for (double v : gc.per_M_c17) CHECK(v >= gc.c17_hat);
    for (double v : gc.per_M_c18) CHECK(v <= gc.c18_hat);
}

TEST_CASE("growth comparison holds sample-by-sample") {
    // c17 L^{-M} |x-y| <= d <= max(2, c18 N^{-M} |x-y|^{d_f}) on a fresh stream
    const auto& sys = gasket();
    const GrowthConstants gc = growth_constants(sys, {-1, 0, 1}, 200, 7);
    const double df = sys.dims().d_f;
    for (int M : {-1, 0, 1}) {
        const CellGraph g = build_cell_graph(sys, M, M + 2);
        for (int i = 0; i < 50; ++i) {
            const auto [x, y] = metric_sample_pair(sys, M, 424242, static_cast<std::uint64_t>(i));
            const double r = dist(x, y);
            if (r < 1e-12) continue;
            const double d = static_cast<double>(d_M(sys, g, x, y).d);
            CHECK(gc.c17_cert * r / sys.pow_L(M) <= d);
            CHECK(d <= std::max(2.0, gc.c18_cert * std::pow(r, df) /
                                         std::pow(static_cast<double>(sys.N()), M)));
        }
    }
}

TEST_CASE("cells within one cell stay at distance one") {
    // |x-y| <= L^M diam for a shared cell, so the lower constant can't exceed
    // L^M / |x-y| there; sampled pairs in the base cell confirm it
    const auto& sys = gasket();
    Rng rng(71);
    for (int i = 0; i < 20; ++i) {
        const Vec2 x = sample_point(sys, 0, 5, rng);
        const Vec2 y = sample_point(sys, 0, 5, rng);
        CHECK(dist(x, y) <= sys.diam0() + 1e-12);
        CHECK(d_M(sys, x, y, 0, 2).d <= 1);
    }
}

TEST_CASE("separation constant of the gasket is one") {
    const auto& sys = gasket();
    const double c19 = separation_constant(sys, 0);
    CHECK(c19 == doctest::Approx(1.0).epsilon(1e-9));
    // scale-free: the same number at another lattice level
    CHECK(separation_constant(sys, 1) == doctest::Approx(c19).epsilon(1e-9));
    CHECK(separation_constant(sys, -2) == doctest::Approx(c19).epsilon(1e-9));
}

TEST_CASE("separation constant of the hexagonal system") {
    const double c19 = separation_constant(snowflake(), 0);
    CHECK(c19 > 0);
    CHECK(c19 < snowflake().diam0());  // disjoint cells come closer than a diameter
    CHECK(separation_constant(snowflake(), 1) == doctest::Approx(c19).epsilon(1e-9));
}

TEST_CASE("uniform chain bound for nearby points") {
    const auto& sys = gasket();
    const int n0 = kumagai_n(sys, 0);
    CHECK(n0 == 2);
    CHECK(kumagai_n(sys, 1) == n0);
    CHECK(kumagai_n(sys, -1) == n0);
    CHECK(kumagai_n(snowflake(), 0) == kumagai_n(snowflake(), 1));
}

}  // TEST_SUITE
