#include "nestedheat/graph_metric.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace nh {
namespace {

// Multi-source BFS on the cell graph.  Sources sit at chain length 1; the
// result is the length of the shortest chain ending in any target cell.
MetricResult chain_distance(const CellGraph& g, const std::vector<int>& sources,
                            const std::vector<int>& targets, std::int64_t frontier_cap) {
    std::vector<bool> is_target(g.cells.size(), false);
    for (int c : targets) is_target[static_cast<std::size_t>(c)] = true;
    std::vector<int> depth(g.cells.size(), 0);
    std::deque<int> queue;
    std::int64_t visited = 0;
    for (int c : sources) {
        if (is_target[static_cast<std::size_t>(c)]) return {1, false};
        if (depth[static_cast<std::size_t>(c)] == 0) {
            depth[static_cast<std::size_t>(c)] = 1;
            queue.push_back(c);
            ++visited;
        }
    }
    int deepest = 1;
    while (!queue.empty()) {
        const int c = queue.front();
        queue.pop_front();
        deepest = depth[static_cast<std::size_t>(c)];
        for (int n : g.adj[static_cast<std::size_t>(c)]) {
            if (depth[static_cast<std::size_t>(n)] != 0) continue;
            depth[static_cast<std::size_t>(n)] = deepest + 1;
            if (is_target[static_cast<std::size_t>(n)]) return {deepest + 1, false};
            if (++visited > frontier_cap) return {deepest + 1, true};
            queue.push_back(n);
        }
    }
    fail(Errc::NotConnected, "no chain joins the two points within the envelope");
}

std::vector<int> cell_ranks_of(const FractalSystem& sys, const CellGraph& g, const Vec2& x) {
    std::vector<int> ranks;
    for (const CellAddress& a : containing_cells(sys, x, g.level, g.envelope))
        ranks.push_back(static_cast<int>(address_rank(sys, a)));
    return ranks;
}

}  // namespace

CellGraph build_cell_graph(const FractalSystem& sys, int M, int J, std::int64_t cap) {
    CellGraph g;
    g.level = M;
    g.envelope = J;
    g.verts = VertexTable(kVertexQuant * sys.pow_L(M) * sys.diam0());
    const double s = sys.pow_L(M);
    const auto& v0 = sys.essential_fixed_points();
    visit_cells(
        sys, M, J,
        [&](const CellAddress& a, const Vec2& tau) {
            const int c = static_cast<int>(g.cells.size());
            g.cells.push_back(a);
            g.translations.push_back(tau);
            for (const Vec2& v : v0) {
                const int vid = g.verts.insert(s * v + tau);
                g.cell_vertex.push_back(vid);
                if (vid == static_cast<int>(g.incident.size())) g.incident.emplace_back();
                g.incident[static_cast<std::size_t>(vid)].push_back(c);
            }
        },
        cap);
    g.adj.assign(g.cells.size(), {});
    for (const auto& cells : g.incident) {
        for (int a : cells) {
            for (int b : cells) {
                if (a != b) g.adj[static_cast<std::size_t>(a)].push_back(b);
            }
        }
    }
    for (auto& nbrs : g.adj) {
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    return g;
}

MetricResult d_M(const FractalSystem& sys, const CellGraph& graph, const Vec2& x, const Vec2& y,
                 std::int64_t frontier_cap) {
    if (dist(x, y) <= geom_tol(sys, graph.level)) return {0, false};
    return chain_distance(graph, cell_ranks_of(sys, graph, x), cell_ranks_of(sys, graph, y),
                          frontier_cap);
}

MetricResult d_M(const FractalSystem& sys, const Vec2& x, const Vec2& y, int M, int J,
                 std::int64_t frontier_cap) {
    return d_M(sys, build_cell_graph(sys, M, J), x, y, frontier_cap);
}

std::pair<Vec2, Vec2> metric_sample_pair(const FractalSystem& sys, int M,
                                         std::uint64_t stream, std::uint64_t pair_index) {
    Rng rng(Rng::derive(stream, pair_index));
    const double tol = geom_tol(sys, M);
    Vec2 x = sample_point(sys, M + 2, 6, rng);
    Vec2 y = sample_point(sys, M + 2, 6, rng);
    while (dist(x, y) <= tol) y = sample_point(sys, M + 2, 6, rng);
    return {x, y};
}

GrowthConstants growth_constants(const FractalSystem& sys, const std::vector<int>& M_values,
                                 int samples_per_M, std::uint64_t seed, double margin) {
    if (M_values.empty() || samples_per_M <= 0)
        fail(Errc::GridEmpty, "growth scan needs at least one level and one sample");
    GrowthConstants out;
    out.M_values = M_values;
    out.samples_per_M = samples_per_M;
    out.seed = seed;
    const double d_f = sys.dims().d_f;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0;
    for (std::size_t i = 0; i < M_values.size(); ++i) {
        const int M = M_values[i];
        const CellGraph graph = build_cell_graph(sys, M, M + 2);
        // Keyed to the level value so distinct levels draw distinct samples
        // rather than scale-copies of one another.
        const std::uint64_t stream =
            Rng::derive(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(M) + 512));
        double lo_M = std::numeric_limits<double>::infinity();
        double hi_M = 0;
        for (int t = 0; t < samples_per_M; ++t) {
            const auto [x, y] = metric_sample_pair(sys, M, stream, static_cast<std::uint64_t>(t));
            const MetricResult r = d_M(sys, graph, x, y);
            if (r.lower_bound) continue;  // capped chains would understate both sides
            const double sep = dist(x, y);
            lo_M = std::min(lo_M, r.d * sys.pow_L(M) / sep);
            if (r.d > 2)
                hi_M = std::max(hi_M, r.d * std::pow(static_cast<double>(sys.N()), M) /
                                          std::pow(sep, d_f));
        }
        out.per_M_c17.push_back(lo_M);
        out.per_M_c18.push_back(hi_M);
        lo = std::min(lo, lo_M);
        hi = std::max(hi, hi_M);
    }
    out.c17_hat = lo;
    out.c18_hat = hi;
    out.c17_cert = lo / margin;
    out.c18_cert = hi * margin;
    std::ostringstream os;
    os << "ratio extremes over depth-6 pairs in the level+2 envelope, " << samples_per_M
       << " pairs per level, margin " << margin;
    out.description = os.str();
    return out;
}

double separation_constant(const FractalSystem& sys, int m, int J) {
    if (J == INT_MIN) J = m + 2;
    if (J < m + 1) fail(Errc::BadAddress, "separation probe envelope must exceed the level");
    const CellGraph g = build_cell_graph(sys, m, J);
    const int k = sys.k();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < g.cells.size(); ++a) {
        for (std::size_t b = a + 1; b < g.cells.size(); ++b) {
            if (std::binary_search(g.adj[a].begin(), g.adj[a].end(), static_cast<int>(b)))
                continue;  // cells share a vertex, hence are not disjoint
            for (int p = 0; p < k; ++p) {
                for (int q = 0; q < k; ++q) {
                    const Vec2 u = g.verts.points()[static_cast<std::size_t>(
                        g.cell_vertex[a * static_cast<std::size_t>(k) +
                                      static_cast<std::size_t>(p)])];
                    const Vec2 v = g.verts.points()[static_cast<std::size_t>(
                        g.cell_vertex[b * static_cast<std::size_t>(k) +
                                      static_cast<std::size_t>(q)])];
                    best = std::min(best, dist(u, v));
                }
            }
        }
    }
    return best / sys.pow_L(m);
}

int kumagai_n(const FractalSystem& sys, int M) {
    // Probe a (1/L^2)-dense net of K^<M+1>: the level-(M-2) lattice.  Chains
    // may route through the level+2 envelope.  Both choices are scale
    // equivariant, so the result does not depend on M.
    const CellGraph graph = build_cell_graph(sys, M, M + 2);
    const VertexLattice net = vertex_lattice(sys, M - 2, M + 1);
    const auto& pts = net.table.points();
    std::vector<std::vector<int>> ranks(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) ranks[i] = cell_ranks_of(sys, graph, pts[i]);
    const double reach = sys.pow_L(M);
    int worst = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            if (dist(pts[i], pts[j]) > reach) continue;
            const MetricResult r = chain_distance(graph, ranks[i], ranks[j], kDefaultFrontierCap);
            if (!r.lower_bound) worst = std::max(worst, r.d);
        }
    }
    return worst;
}

}  // namespace nh
