#include "nestedheat/random_walk.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nestedheat/rng.hpp"

namespace nh {
namespace {

constexpr std::int64_t kMaxStoredSteps = 100'000'000;

void check_vertex(const WalkGraph& g, int v) {
    if (v < 0 || v >= static_cast<int>(g.verts.size()))
        fail(Errc::BadAddress, "walk vertex index out of range");
}

int degree(const WalkGraph& g, int v) {
    return g.adj_start[static_cast<std::size_t>(v) + 1] - g.adj_start[static_cast<std::size_t>(v)];
}

// One uniform step; the caller guarantees v is not absorbing.
int step_uniform(const WalkGraph& g, int v, Rng& rng) {
    const int base = g.adj_start[static_cast<std::size_t>(v)];
    return g.adj[static_cast<std::size_t>(
        base + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(degree(g, v)))))];
}

void check_checkpoints(const std::vector<std::int64_t>& cps, std::int64_t steps) {
    std::int64_t prev = -1;
    for (std::int64_t c : cps) {
        if (c <= prev || c > steps)
            fail(Errc::BadAddress, "checkpoints must increase and stay within the step budget");
        prev = c;
    }
}

}  // namespace

WalkGraph build_walk_graph(const FractalSystem& sys, int n, int J, std::int64_t cap) {
    WalkGraph g;
    g.level = n;
    g.envelope = J;
    g.time_step = std::exp(n * sys.dims().d_w * std::log(sys.L()));
    g.verts = VertexTable(kVertexQuant * sys.pow_L(n) * sys.diam0());
    const double s = sys.pow_L(n);
    const auto& v0 = sys.essential_fixed_points();
    const int k = sys.k();
    std::vector<std::vector<int>> nbrs;
    std::vector<int> ids(static_cast<std::size_t>(k));
    visit_cells(
        sys, n, J,
        [&](const CellAddress&, const Vec2& tau) {
            for (int p = 0; p < k; ++p) {
                const int vid = g.verts.insert(s * v0[static_cast<std::size_t>(p)] + tau);
                ids[static_cast<std::size_t>(p)] = vid;
                if (vid == static_cast<int>(nbrs.size())) {
                    nbrs.emplace_back();
                    g.rank.push_back(0);
                }
                ++g.rank[static_cast<std::size_t>(vid)];
            }
            for (int p = 0; p < k; ++p) {
                for (int q = 0; q < k; ++q) {
                    if (p != q)
                        nbrs[static_cast<std::size_t>(ids[static_cast<std::size_t>(p)])].push_back(
                            ids[static_cast<std::size_t>(q)]);
                }
            }
        },
        cap);
    g.adj_start.assign(g.verts.size() + 1, 0);
    for (std::size_t v = 0; v < nbrs.size(); ++v) {
        auto& list = nbrs[v];
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        g.adj_start[v + 1] = g.adj_start[v] + static_cast<int>(list.size());
    }
    g.adj.reserve(static_cast<std::size_t>(g.adj_start.back()));
    for (const auto& list : nbrs) g.adj.insert(g.adj.end(), list.begin(), list.end());

    // Envelope-boundary vertices: points where cells beyond K^<J> attach.
    // These are exactly the single-contact vertices of the level-J complex.
    g.absorbing.assign(g.verts.size(), false);
    const double tol = geom_tol(sys, n);
    for (const BoundaryContact& b : boundary_set(sys, J, J + 2)) {
        const int vid = g.verts.find(b.z);
        if (vid >= 0 && dist(g.verts.points()[static_cast<std::size_t>(vid)], b.z) <= tol)
            g.absorbing[static_cast<std::size_t>(vid)] = true;
    }
    return g;
}

Trajectory simulate(const WalkGraph& graph, int x0, std::int64_t steps, std::uint64_t seed) {
    check_vertex(graph, x0);
    if (steps < 0 || steps > kMaxStoredSteps)
        fail(Errc::MCUnavailable, "stored trajectories support at most 1e8 steps");
    Trajectory traj;
    traj.start = x0;
    traj.time_step = graph.time_step;
    traj.positions.reserve(static_cast<std::size_t>(steps) + 1);
    traj.positions.push_back(x0);
    Rng rng(seed);
    int v = x0;
    for (std::int64_t s = 0; s < steps; ++s) {
        if (graph.absorbing[static_cast<std::size_t>(v)]) {
            traj.absorbed = true;
            break;
        }
        v = step_uniform(graph, v, rng);
        traj.positions.push_back(v);
    }
    if (graph.absorbing[static_cast<std::size_t>(v)]) traj.absorbed = true;
    return traj;
}

std::vector<Vec2> fold_trajectory(const FractalSystem& sys, const Labelling& lab,
                                  const WalkGraph& graph, const Trajectory& traj, int M) {
    std::vector<Vec2> folded(graph.verts.size());
    std::vector<bool> known(graph.verts.size(), false);
    std::vector<Vec2> out;
    out.reserve(traj.positions.size());
    for (int v : traj.positions) {
        check_vertex(graph, v);
        if (!known[static_cast<std::size_t>(v)]) {
            folded[static_cast<std::size_t>(v)] =
                project(sys, lab, graph.verts.points()[static_cast<std::size_t>(v)], M);
            known[static_cast<std::size_t>(v)] = true;
        }
        out.push_back(folded[static_cast<std::size_t>(v)]);
    }
    return out;
}

std::map<std::int64_t, double> empirical_density(const FractalSystem& sys, const Labelling& lab,
                                                 const WalkGraph& graph,
                                                 const std::vector<Trajectory>& trajs, double t,
                                                 int bin_level, int M, int min_bin_count) {
    if (!(t > 0) || !std::isfinite(t)) fail(Errc::BadTime, "time must be positive and finite");
    const auto step = static_cast<std::int64_t>(std::llround(t / graph.time_step));
    std::map<std::int64_t, double> mass;
    std::map<std::int64_t, std::int64_t> hits;
    // Folding and binning are pure per-vertex; cache both.
    std::vector<std::vector<std::int64_t>> bins_of(graph.verts.size());
    std::vector<bool> known(graph.verts.size(), false);
    std::int64_t used = 0;
    for (const Trajectory& traj : trajs) {
        if (step >= static_cast<std::int64_t>(traj.positions.size())) continue;
        const int v = traj.positions[static_cast<std::size_t>(step)];
        check_vertex(graph, v);
        if (!known[static_cast<std::size_t>(v)]) {
            const Vec2 p = project(sys, lab, graph.verts.points()[static_cast<std::size_t>(v)], M);
            for (const CellAddress& a : containing_cells(sys, p, bin_level, M))
                bins_of[static_cast<std::size_t>(v)].push_back(address_rank(sys, a));
            known[static_cast<std::size_t>(v)] = true;
        }
        const auto& bins = bins_of[static_cast<std::size_t>(v)];
        const double share = 1.0 / static_cast<double>(bins.size());
        for (std::int64_t b : bins) {
            mass[b] += share;
            ++hits[b];
        }
        ++used;
    }
    if (used == 0)
        fail(Errc::InsufficientSamples, "no trajectory reaches the requested time");
    // Normalize to a density against mu(level-l cell) = N^l.
    const double mu = std::pow(static_cast<double>(sys.N()), bin_level);
    std::map<std::int64_t, double> out;
    for (const auto& [b, m] : mass) {
        if (hits[b] < min_bin_count) continue;
        out[b] = m / static_cast<double>(used) / mu;
    }
    return out;
}

std::int64_t run_ensemble(const WalkGraph& graph, int x0, std::int64_t walks, std::uint64_t seed,
                          const std::vector<std::int64_t>& checkpoints,
                          const std::function<void(std::int64_t, int, int)>& on_checkpoint) {
    check_vertex(graph, x0);
    if (walks <= 0) fail(Errc::InsufficientSamples, "ensemble needs at least one walk");
    const std::int64_t last = checkpoints.empty() ? 0 : checkpoints.back();
    check_checkpoints(checkpoints, last);
    std::int64_t absorbed = 0;
    for (std::int64_t w = 0; w < walks; ++w) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(w)));
        int v = x0;
        bool hit = false;
        std::int64_t at = 0;
        for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
            for (; at < checkpoints[ci]; ++at) {
                if (graph.absorbing[static_cast<std::size_t>(v)]) {
                    hit = true;
                    break;  // trapped; the vertex repeats at later checkpoints
                }
                v = step_uniform(graph, v, rng);
            }
            if (graph.absorbing[static_cast<std::size_t>(v)]) hit = true;
            on_checkpoint(w, static_cast<int>(ci), v);
            if (hit) {
                for (std::size_t cj = ci + 1; cj < checkpoints.size(); ++cj)
                    on_checkpoint(w, static_cast<int>(cj), v);
                break;
            }
        }
        if (hit) ++absorbed;
    }
    return absorbed;
}

FoldedChain build_folded_chain(const FractalSystem& sys, const Labelling& lab, int n, int M) {
    // Free neighborhoods are complete away from the envelope boundary, so the
    // level M+1 envelope provides every state of K^<M> with at least one
    // preimage whose step law is untruncated.
    const WalkGraph free_graph = build_walk_graph(sys, n, M + 1);
    FoldedChain chain;
    chain.level = n;
    chain.base_level = M;
    chain.verts = VertexTable(free_graph.verts.quantum());

    std::vector<int> state_of(free_graph.verts.size(), -1);
    for (std::size_t v = 0; v < free_graph.verts.size(); ++v)
        state_of[v] = chain.verts.insert(project(sys, lab, free_graph.verts.points()[v], M));

    // Pushforward law per state: counts of projected neighbors over the free
    // degree.  Laws from different preimages must agree exactly.
    std::vector<std::vector<std::pair<int, int>>> law(chain.verts.size());  // (state, count)
    std::vector<int> law_degree(chain.verts.size(), 0);
    for (std::size_t v = 0; v < free_graph.verts.size(); ++v) {
        if (free_graph.absorbing[v]) continue;  // truncated neighborhood
        const int s = state_of[v];
        std::vector<std::pair<int, int>> counts;
        for (int e = free_graph.adj_start[v]; e < free_graph.adj_start[v + 1]; ++e) {
            const int t = state_of[static_cast<std::size_t>(
                free_graph.adj[static_cast<std::size_t>(e)])];
            bool found = false;
            for (auto& [st, c] : counts) {
                if (st == t) {
                    ++c;
                    found = true;
                }
            }
            if (!found) counts.emplace_back(t, 1);
        }
        std::sort(counts.begin(), counts.end());
        const int deg = free_graph.adj_start[v + 1] - free_graph.adj_start[v];
        if (law_degree[static_cast<std::size_t>(s)] == 0) {
            law[static_cast<std::size_t>(s)] = counts;
            law_degree[static_cast<std::size_t>(s)] = deg;
        } else {
            // Preimages of higher rank scale counts and degree together, so
            // compare the distributions c/deg, exactly, in cross-multiplied
            // integers.
            const auto& ref = law[static_cast<std::size_t>(s)];
            const int ref_deg = law_degree[static_cast<std::size_t>(s)];
            bool same = ref.size() == counts.size();
            for (std::size_t i = 0; same && i < ref.size(); ++i)
                same = ref[i].first == counts[i].first &&
                       ref[i].second * deg == counts[i].second * ref_deg;
            if (!same)
                fail(Errc::NoGLP, "folded step law differs between preimages of a state");
        }
    }
    for (std::size_t s = 0; s < law.size(); ++s) {
        if (law_degree[s] == 0)
            fail(Errc::NotConnected, "state has no preimage with a complete neighborhood");
    }

    chain.adj_start.assign(chain.verts.size() + 1, 0);
    for (std::size_t s = 0; s < law.size(); ++s)
        chain.adj_start[s + 1] = chain.adj_start[s] + static_cast<int>(law[s].size());
    chain.adj.reserve(static_cast<std::size_t>(chain.adj_start.back()));
    chain.prob.reserve(static_cast<std::size_t>(chain.adj_start.back()));
    for (std::size_t s = 0; s < law.size(); ++s) {
        for (const auto& [t, c] : law[s]) {
            chain.adj.push_back(t);
            chain.prob.push_back(static_cast<double>(c) / law_degree[s]);
        }
    }
    return chain;
}

std::vector<int> simulate_folded(const FoldedChain& chain, int x0, std::int64_t steps,
                                 std::uint64_t seed, const std::vector<std::int64_t>& checkpoints) {
    if (x0 < 0 || x0 >= static_cast<int>(chain.verts.size()))
        fail(Errc::BadAddress, "walk vertex index out of range");
    check_checkpoints(checkpoints, steps);
    Rng rng(seed);
    std::vector<int> out;
    out.reserve(checkpoints.size());
    int v = x0;
    std::int64_t at = 0;
    for (std::int64_t cp : checkpoints) {
        for (; at < cp; ++at) {
            const int base = chain.adj_start[static_cast<std::size_t>(v)];
            const int end = chain.adj_start[static_cast<std::size_t>(v) + 1];
            double r = rng.uniform();
            int next = chain.adj[static_cast<std::size_t>(end) - 1];
            for (int e = base; e < end; ++e) {
                r -= chain.prob[static_cast<std::size_t>(e)];
                if (r < 0) {
                    next = chain.adj[static_cast<std::size_t>(e)];
                    break;
                }
            }
            v = next;
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace nh
