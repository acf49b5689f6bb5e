#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nestedheat/kernels.hpp"

namespace nh {

// Grid over which a two-sided estimate is scanned: times are factors times
// the natural scale L^{M d_w} of each level, base points are drawn by address
// descent so they lie exactly on the fractal.
struct GridSpec {
    std::vector<double> t_factors;
    std::vector<int> M_values;
    int pairs_per_M = 0;
    int sample_depth = 6;
    std::uint64_t seed = 0;
    double stability = 10.0;  // allowed drift of per-M ratio extremes
};

GridSpec default_grid(std::uint64_t seed);

struct WorstCase {
    double t = 0;
    int M = 0;
    Vec2 x, y;
    double log_ratio = 0;
};

// Outcome of one scan.  Ratio extremes are carried in logs (the far tails of
// the envelopes run beyond double range); exp values accompany them when
// finite.  pass reflects positivity, finiteness, and per-M stability.
struct BoundReport {
    std::string claim;  // thm31 | thm32 | lem36 | cor37 | card | metric
    std::string system;
    GridSpec grid;
    double log_min_ratio = 0;
    double log_max_ratio = 0;
    std::vector<double> per_M_log_min;
    std::vector<double> per_M_log_max;
    WorstCase worst_low;   // attains the min ratio
    WorstCase worst_high;  // attains the max ratio
    std::map<std::string, double> stats;  // named empirical constants
    std::vector<std::string> notes;
    bool pass = false;
};

// Ratio scan of the reflected density against the two-sided envelope
// max(f_c(t,|x-y|), h_c(t,M)).
BoundReport scan_theorem_1(const KernelParams& params, const FractalSystem& sys,
                           const Labelling& lab, const GridSpec& grid);

// Ratio scan of g_M - g against max(f_c(t,delta_M(x,y)), h_c(t,M)).
BoundReport scan_theorem_2(const KernelParams& params, const FractalSystem& sys,
                           const Labelling& lab, const GridSpec& grid);

// Ratio scan of the far-fiber part g1 against h_c alone.
BoundReport scan_lemma_tail(const KernelParams& params, const FractalSystem& sys,
                            const Labelling& lab, const GridSpec& grid);

// Regime bands: A (t > L^{M d_w}): g_M * L^{M d_f} within a bounded band;
// B (|x-y|^{d_w} < t <= L^{M d_w}): g_M * t^{d_s/2} within a bounded band;
// C (t <= |x-y|^{d_w}): two-sided f-comparison.
BoundReport scan_corollary(const KernelParams& params, const FractalSystem& sys,
                           const Labelling& lab, const GridSpec& grid);

// Exact shell-count check: |A(M,m,y)| = N^m (N-1) for m <= m_max at every
// sampled base point, |B| <= N-1.  With a labelling the fiber points are
// enumerated and re-projected; without one (no consistent labelling exists)
// the same counts are certified from cell addresses alone.
BoundReport check_cardinalities(const FractalSystem& sys, const Labelling* lab, int M, int m_max,
                                const std::vector<Vec2>& sample_ys);

// Metric scan packaging: fitted growth constants with held-out verification,
// per-M drift, and the uniform chain-length constant.
BoundReport check_metric(const FractalSystem& sys, const std::vector<int>& M_values,
                         int samples_per_M, std::uint64_t seed);

// Sample one on-fractal evaluation pair for level M (address descent).
std::pair<Vec2, Vec2> grid_sample_pair(const FractalSystem& sys, int M, int depth, Rng& rng);

}  // namespace nh
