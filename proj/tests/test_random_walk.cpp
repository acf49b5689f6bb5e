#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "nestedheat/random_walk.hpp"
#include "test_support.hpp"

using namespace nh;
using nhtest::gasket;
using nhtest::gasket_labelling;
using nhtest::snowflake;

namespace {

std::vector<int> neighbors_of(const WalkGraph& g, int v) {
    return {g.adj.begin() + g.adj_start[static_cast<std::size_t>(v)],
            g.adj.begin() + g.adj_start[static_cast<std::size_t>(v) + 1]};
}

}  // namespace

TEST_SUITE("random_walk") {

TEST_CASE("walk graph degrees on the gasket lattice") {
    const WalkGraph g = build_walk_graph(gasket(), -1, 0);
    CHECK(g.verts.size() == 6);
    std::multiset<std::size_t> degs;
    for (std::size_t v = 0; v < g.verts.size(); ++v)
        degs.insert(neighbors_of(g, static_cast<int>(v)).size());
    // three corners meet one cell (degree 2), three midpoints meet two
    CHECK(degs.count(2) == 3);
    CHECK(degs.count(4) == 3);
    // neighbor lists are sorted, symmetric, and never self-refer
    for (std::size_t v = 0; v < g.verts.size(); ++v) {
        const auto nb = neighbors_of(g, static_cast<int>(v));
        CHECK(std::is_sorted(nb.begin(), nb.end()));
        for (int w : nb) {
            CHECK(w != static_cast<int>(v));
            const auto back = neighbors_of(g, w);
            CHECK(std::find(back.begin(), back.end(), static_cast<int>(v)) != back.end());
        }
    }
}

TEST_CASE("walk graph degrees on the hexagonal lattice") {
    const auto& sys = snowflake();
    const WalkGraph g = build_walk_graph(sys, -1, 0);
    const std::size_t d1 = static_cast<std::size_t>(sys.k()) - 1;
    for (std::size_t v = 0; v < g.verts.size(); ++v) {
        const std::size_t deg = neighbors_of(g, static_cast<int>(v)).size();
        CHECK((deg == d1 || deg == 2 * d1));
    }
}

TEST_CASE("time step follows the walk dimension") {
    const auto& sys = gasket();
    const WalkGraph g3 = build_walk_graph(sys, -3, 0);
    CHECK(g3.time_step == doctest::Approx(1.0 / 125.0).epsilon(1e-14));
    const WalkGraph g0 = build_walk_graph(sys, 0, 1);
    CHECK(g0.time_step == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("interior vertices are live, envelope contacts absorb") {
    const auto& sys = gasket();
    const WalkGraph g = build_walk_graph(sys, -2, 0);
    // within a one-cell envelope the outward contact vertices V* are absorbing
    const auto bs = boundary_set(sys, 0);
    std::size_t absorbing = 0;
    for (std::size_t v = 0; v < g.verts.size(); ++v)
        if (g.absorbing[v]) ++absorbing;
    CHECK(absorbing == bs.size());
    for (const auto& bc : bs) {
        const int id = g.verts.find(bc.z);
        REQUIRE(id >= 0);
        CHECK(g.absorbing[static_cast<std::size_t>(id)]);
    }
    const int origin = g.verts.find({0.0, 0.0});
    REQUIRE(origin >= 0);
    CHECK_FALSE(g.absorbing[static_cast<std::size_t>(origin)]);
}

TEST_CASE("simulation basics") {
    const auto& sys = gasket();
    const WalkGraph g = build_walk_graph(sys, -2, 1);
    const int x0 = g.verts.find({0.0, 0.0});
    REQUIRE(x0 >= 0);

    SUBCASE("zero steps returns just the start") {
        const Trajectory t = simulate(g, x0, 0, 11);
        CHECK(t.positions == std::vector<int>{x0});
        CHECK_FALSE(t.absorbed);
    }
    SUBCASE("fixed seeds reproduce exactly") {
        const Trajectory a = simulate(g, x0, 500, 12);
        const Trajectory b = simulate(g, x0, 500, 12);
        CHECK(a.positions == b.positions);
        const Trajectory c = simulate(g, x0, 500, 13);
        CHECK(a.positions != c.positions);
    }
    SUBCASE("consecutive positions are neighbors") {
        const Trajectory t = simulate(g, x0, 400, 14);
        for (std::size_t i = 1; i < t.positions.size(); ++i) {
            const auto nb = neighbors_of(g, t.positions[i - 1]);
            CHECK(std::find(nb.begin(), nb.end(), t.positions[i]) != nb.end());
        }
    }
    SUBCASE("absorbed walks stop at an absorbing vertex") {
        // tiny envelope: absorption is quick and flagged
        const WalkGraph tiny = build_walk_graph(sys, -1, 0);
        const int o = tiny.verts.find({0.0, 0.0});
        REQUIRE(o >= 0);
        int hits = 0;
        for (std::uint64_t s = 0; s < 50; ++s) {
            const Trajectory t = simulate(tiny, o, 2000, s);
            if (!t.absorbed) continue;
            ++hits;
            CHECK(tiny.absorbing[static_cast<std::size_t>(t.positions.back())]);
            CHECK(t.positions.size() <= 2001);
        }
        CHECK(hits > 25);  // the one-cell envelope absorbs most long walks
    }
}

TEST_CASE("steps from an interior vertex are uniform over neighbors") {
    const auto& sys = gasket();
    const WalkGraph g = build_walk_graph(sys, -2, 1);
    const int v = g.verts.find({0.5, 0.0});  // interior at this envelope
    REQUIRE(v >= 0);
    const auto nb = neighbors_of(g, v);
    REQUIRE(nb.size() == 4);
    // transitions out of v, pooled over many short walks
    std::map<int, int> freq;
    int from_v = 0;
    for (std::uint64_t s = 0; s < 4000; ++s) {
        const Trajectory t = simulate(g, v, 400, 1000 + s);
        for (std::size_t i = 1; i < t.positions.size(); ++i)
            if (t.positions[i - 1] == v) {
                ++freq[t.positions[i]];
                ++from_v;
            }
    }
    REQUIRE(from_v > 20000);
    for (int w : nb) {
        const double p = static_cast<double>(freq[w]) / from_v;
        CHECK(p == doctest::Approx(0.25).epsilon(0.05));
    }
}

TEST_CASE("folding a trajectory keeps it on the base complex") {
    const auto& sys = gasket();
    const Labelling& lab = gasket_labelling(0, 2);
    const WalkGraph g = build_walk_graph(sys, -2, 2);
    const int x0 = g.verts.find({0.0, 0.0});
    REQUIRE(x0 >= 0);
    const Trajectory t = simulate(g, x0, 600, 21);
    const auto folded = fold_trajectory(sys, lab, g, t, 0);
    REQUIRE(folded.size() == t.positions.size());
    for (const Vec2& p : folded) CHECK(sys.on_fractal(p, 0));
    // positions already inside the base complex fold to themselves
    for (std::size_t i = 0; i < folded.size(); ++i) {
        const Vec2 raw = g.verts.points()[static_cast<std::size_t>(t.positions[i])];
        if (sys.on_fractal(raw, 0)) CHECK(dist(folded[i], raw) < 1e-9);
    }
}

TEST_CASE("ensemble checkpoints match isolated replay") {
    const auto& sys = gasket();
    const WalkGraph g = build_walk_graph(sys, -2, 2);
    const int x0 = g.verts.find({0.0, 0.0});
    REQUIRE(x0 >= 0);
    const std::vector<std::int64_t> cps{5, 20, 60};
    std::map<std::pair<std::int64_t, int>, int> seen;
    const std::int64_t absorbed =
        run_ensemble(g, x0, 8, 77, cps, [&](std::int64_t walk, int cp, int vertex) {
            seen[{walk, cp}] = vertex;
        });
    CHECK(absorbed == 0);  // J = 2 envelope, 60 steps: contacts are out of reach
    for (std::int64_t w = 0; w < 8; ++w) {
        const Trajectory t = simulate(g, x0, 60, Rng::derive(77, static_cast<std::uint64_t>(w)));
        REQUIRE(t.positions.size() == 61);
        for (std::size_t c = 0; c < cps.size(); ++c) {
            REQUIRE(seen.count({w, static_cast<int>(c)}) == 1);
            CHECK(seen[{w, static_cast<int>(c)}] ==
                  t.positions[static_cast<std::size_t>(cps[c])]);
        }
    }
}

TEST_CASE("folded chain agrees with the free walk inside the base") {
    const auto& sys = gasket();
    const Labelling& lab = gasket_labelling(0, 2);
    const FoldedChain chain = build_folded_chain(sys, lab, -2, 0);
    const VertexLattice lat = vertex_lattice(sys, -2, 0);
    CHECK(chain.verts.size() == lat.table.size());
    // transition rows are probability vectors
    for (std::size_t s = 0; s < chain.verts.size(); ++s) {
        double row = 0;
        for (int e = chain.adj_start[s]; e < chain.adj_start[s + 1]; ++e)
            row += chain.prob[static_cast<std::size_t>(e)];
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
    // at an interior lattice vertex the folded law is the uniform free law
    const int v = chain.verts.find({0.5, 0.0});
    REQUIRE(v >= 0);
    const WalkGraph free_walk = build_walk_graph(sys, -2, 1);
    const int fv = free_walk.verts.find({0.5, 0.0});
    REQUIRE(fv >= 0);
    const auto free_nb = neighbors_of(free_walk, fv);
    std::map<double, double> by_dist;  // signature: distance -> probability
    for (int e = chain.adj_start[static_cast<std::size_t>(v)];
         e < chain.adj_start[static_cast<std::size_t>(v) + 1]; ++e) {
        CHECK(chain.prob[static_cast<std::size_t>(e)] == doctest::Approx(0.25));
    }
    CHECK(chain.adj_start[static_cast<std::size_t>(v) + 1] -
              chain.adj_start[static_cast<std::size_t>(v)] ==
          static_cast<int>(free_nb.size()));
    (void)by_dist;
}

TEST_CASE("folded simulation is deterministic and stays on lattice states") {
    const auto& sys = gasket();
    const Labelling& lab = gasket_labelling(0, 2);
    const FoldedChain chain = build_folded_chain(sys, lab, -2, 0);
    const int x0 = chain.verts.find({0.0, 0.0});
    REQUIRE(x0 >= 0);
    const auto a = simulate_folded(chain, x0, 300, 31, {100, 200, 300});
    const auto b = simulate_folded(chain, x0, 300, 31, {100, 200, 300});
    CHECK(a == b);
    REQUIRE(a.size() == 3);
    for (int s : a) {
        CHECK(s >= 0);
        CHECK(s < static_cast<int>(chain.verts.size()));
    }
}

TEST_CASE("occupation estimates integrate to one") {
    const auto& sys = gasket();
    const Labelling& lab = gasket_labelling(0, 2);
    const WalkGraph g = build_walk_graph(sys, -3, 1);
    const int x0 = g.verts.find({0.0, 0.0});
    REQUIRE(x0 >= 0);
    std::vector<Trajectory> trajs;
    for (std::uint64_t s = 0; s < 60; ++s) trajs.push_back(simulate(g, x0, 300, s));
    const double t = 250 * g.time_step;
    const auto dens = empirical_density(sys, lab, g, trajs, t, -1, 0);
    REQUIRE_FALSE(dens.empty());
    double mass = 0;
    for (const auto& [bin, value] : dens)
        mass += value * std::pow(static_cast<double>(sys.N()), -1);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
    // rare-bin filtering only removes bins
    const auto filtered = empirical_density(sys, lab, g, trajs, t, -1, 0, 20);
    CHECK(filtered.size() <= dens.size());
}

TEST_CASE("occupation beyond the trajectory horizon is rejected") {
    const auto& sys = gasket();
    const Labelling& lab = gasket_labelling(0, 2);
    const WalkGraph g = build_walk_graph(sys, -3, 1);
    const int x0 = g.verts.find({0.0, 0.0});
    REQUIRE(x0 >= 0);
    std::vector<Trajectory> trajs{simulate(g, x0, 10, 3)};
    CHECK_THROWS_AS(empirical_density(sys, lab, g, trajs, 1000 * g.time_step, -1, 0), Error);
}

}  // TEST_SUITE
