#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "nestedheat/folding.hpp"

namespace nh {

// Nearest-neighbor walk graph on the level-n lattice within K^<J>.  Vertices
// of a common n-cell are mutually adjacent; transitions are uniform over
// neighbors unless a custom edge weight table is installed.  Vertices shared
// with cells beyond the envelope are absorbing: a walk arriving there would
// see truncated dynamics, so it stops and is flagged.
struct WalkGraph {
    int level = 0;     // n (lattice level; negative = finer than K^<0>)
    int envelope = 0;  // J
    double time_step = 0;  // L^{n * d_w} process-time units per step
    VertexTable verts;
    std::vector<int> rank;
    std::vector<int> adj_start;  // CSR offsets, size verts+1
    std::vector<int> adj;
    std::vector<double> edge_prob;  // aligned with adj; empty = uniform
    std::vector<bool> absorbing;
};

WalkGraph build_walk_graph(const FractalSystem& sys, int n, int J,
                           std::int64_t cap = kDefaultCellCap);

// One Markov chain path; positions are vertex indices into the graph.
struct Trajectory {
    int start = 0;
    std::vector<int> positions;  // includes the start; length <= steps+1
    double time_step = 0;
    bool absorbed = false;  // truncated at an envelope-boundary vertex
};

Trajectory simulate(const WalkGraph& graph, int x0, std::int64_t steps, std::uint64_t seed);

// Positionwise folding pi_M of a trajectory; the result stays in K^<M>.
std::vector<Vec2> fold_trajectory(const FractalSystem& sys, const Labelling& lab,
                                  const WalkGraph& graph, const Trajectory& traj, int M);

// Occupation estimate at time t over the level-l cells of K^<M>:
// P(cell) / mu(cell) with mu(level-l cell) = N^l, mu(K^<0>) = 1.
// Trajectory positions are folded into K^<M> first; mass at a vertex shared
// by several bins splits evenly.  Keys are lexicographic cell ranks.
std::map<std::int64_t, double> empirical_density(const FractalSystem& sys, const Labelling& lab,
                                                 const WalkGraph& graph,
                                                 const std::vector<Trajectory>& trajs, double t,
                                                 int bin_level, int M, int min_bin_count = 0);

// Streamed ensemble: runs `walks` independent chains from x0 and reports the
// current vertex at each checkpoint step via on_checkpoint(walk, checkpoint
// index, vertex).  Walks derive their streams from (seed, walk index), so any
// subset of walks is reproducible in isolation.  Returns the absorbed count.
std::int64_t run_ensemble(const WalkGraph& graph, int x0, std::int64_t walks, std::uint64_t seed,
                          const std::vector<std::int64_t>& checkpoints,
                          const std::function<void(std::int64_t, int, int)>& on_checkpoint);

// The folded walk as its own Markov chain on the lattice of K^<M>: states are
// the folded vertices, transitions the pushforward of the free uniform step
// under pi_M.  Construction verifies that every preimage of every state
// induces the same transition law (the projection commutes with the step),
// failing with a library error otherwise.
struct FoldedChain {
    int level = 0;        // lattice level n
    int base_level = 0;   // M
    VertexTable verts;    // lattice of K^<M>
    std::vector<int> adj_start;
    std::vector<int> adj;
    std::vector<double> prob;  // aligned with adj
};

FoldedChain build_folded_chain(const FractalSystem& sys, const Labelling& lab, int n, int M);

// Simulate the folded chain (alias-free inverse-CDF stepping).
std::vector<int> simulate_folded(const FoldedChain& chain, int x0, std::int64_t steps,
                                 std::uint64_t seed, const std::vector<std::int64_t>& checkpoints);

}  // namespace nh
