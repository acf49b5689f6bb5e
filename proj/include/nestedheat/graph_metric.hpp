#pragma once

#include <climits>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nestedheat/geometry.hpp"

namespace nh {

// Default ceiling on the BFS frontier when computing d_M.
inline constexpr std::int64_t kDefaultFrontierCap = 1'000'000;

// Adjacency graph of the level-M cells within K^<J>: two cells are adjacent
// iff they share a lattice vertex (cell intersections are vertex sets).
struct CellGraph {
    int level = 0;     // M
    int envelope = 0;  // J
    std::vector<CellAddress> cells;      // lexicographic
    std::vector<Vec2> translations;      // per cell
    std::vector<std::vector<int>> adj;   // per cell, sorted neighbor ranks
    VertexTable verts;                   // level-M lattice
    std::vector<int> cell_vertex;        // k vertex indices per cell, flattened
    std::vector<std::vector<int>> incident;  // per vertex, cells touching it
};

CellGraph build_cell_graph(const FractalSystem& sys, int M, int J,
                           std::int64_t cap = kDefaultCellCap);

// Chain distance d_M: 0 for x=y, 1 if one cell contains both, else the least
// number of pairwise-intersecting cells joining x to y.
struct MetricResult {
    int d = 0;
    bool lower_bound = false;  // frontier cap hit; true d may be larger
};
MetricResult d_M(const FractalSystem& sys, const CellGraph& graph, const Vec2& x, const Vec2& y,
                 std::int64_t frontier_cap = kDefaultFrontierCap);
MetricResult d_M(const FractalSystem& sys, const Vec2& x, const Vec2& y, int M, int J,
                 std::int64_t frontier_cap = kDefaultFrontierCap);

// Empirical growth constants of the metric: the two-sided comparison
//   c17 * L^{-M} |x-y|  <=  d_M(x,y)  <=  max(2, c18 * N^{-M} |x-y|^{d_f}).
// Raw per-M extremes certify stability; the certified pair carries the
// configured safety margin for held-out verification.
struct GrowthConstants {
    double c17_hat = 0;  // pooled min of d * L^M / |x-y|
    double c18_hat = 0;  // pooled max of d * N^M / |x-y|^{d_f} over d > 2
    double c17_cert = 0; // c17_hat / margin
    double c18_cert = 0; // c18_hat * margin
    std::vector<int> M_values;
    std::vector<double> per_M_c17;
    std::vector<double> per_M_c18;
    int samples_per_M = 0;
    std::uint64_t seed = 0;
    std::string description;
};

GrowthConstants growth_constants(const FractalSystem& sys, const std::vector<int>& M_values,
                                 int samples_per_M, std::uint64_t seed, double margin = 1.5);

// Draw one sample pair for the growth scan (exposed for held-out checks).
// Stream index selects the per-M substream; pair index the draw.
std::pair<Vec2, Vec2> metric_sample_pair(const FractalSystem& sys, int M,
                                         std::uint64_t stream, std::uint64_t pair_index);

// Minimal distance between vertex sets of disjoint m-cell pairs in K^<J>,
// divided by L^m (scale-free).
double separation_constant(const FractalSystem& sys, int m, int J = INT_MIN);

// Max of d_M over a deterministic grid of lattice-vertex pairs at distance
// <= L^M; the uniform chain-length constant for nearby points.
int kumagai_n(const FractalSystem& sys, int M);

}  // namespace nh
