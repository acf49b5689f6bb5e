#include "nestedheat/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nestedheat/graph_metric.hpp"
#include "nestedheat/kahan.hpp"

namespace nh {
namespace {

double natural_time(const FractalSystem& sys, int M, double factor) {
    return factor * std::exp(M * sys.dims().d_w * std::log(sys.L()));
}

// Running per-scan extremes with their witnesses.
struct Extremes {
    double log_min = std::numeric_limits<double>::infinity();
    double log_max = -std::numeric_limits<double>::infinity();
    WorstCase low, high;

    void feed_low(double log_ratio, double t, int M, const Vec2& x, const Vec2& y) {
        if (log_ratio < log_min) {
            log_min = log_ratio;
            low = {t, M, x, y, log_ratio};
        }
    }
    void feed_high(double log_ratio, double t, int M, const Vec2& x, const Vec2& y) {
        if (log_ratio > log_max) {
            log_max = log_ratio;
            high = {t, M, x, y, log_ratio};
        }
    }
    void feed(double log_ratio, double t, int M, const Vec2& x, const Vec2& y) {
        feed_low(log_ratio, t, M, x, y);
        feed_high(log_ratio, t, M, x, y);
    }
};

// One evaluated grid point. The envelope is stored in a c-independent form:
// each branch keeps its log value at c = 1 together with the exponent scale
// s that multiplies (c - 1), so log branch_c = log branch_1 - (c - 1) * s.
struct GridEval {
    double t = 0;
    Vec2 x, y;
    int M = 0;
    std::size_t mi = 0;
    double log_q = 0;       // log of the scanned quantity
    double log_f1 = -std::numeric_limits<double>::infinity();
    double scale_f = 0;
    double log_h1 = -std::numeric_limits<double>::infinity();
    double scale_h = 0;
};

// Deterministic grid walk. Pair streams depend only on the pair index, so
// every level draws scale-copies of the same relative points: the cross-level
// drift check then verifies the scaling structure of the series code (any
// misplaced L^M factor shows up immediately) instead of comparing extreme
// statistics of independent samples, which do not concentrate at this grid
// size for exponentially spread ratios.
template <typename F>
void grid_walk(const FractalSystem& sys, const GridSpec& grid, F&& fn) {
    if (grid.t_factors.empty() || grid.M_values.empty() || grid.pairs_per_M <= 0)
        fail(Errc::GridEmpty, "scan grid needs times, levels, and pairs");
    for (std::size_t mi = 0; mi < grid.M_values.size(); ++mi) {
        const int M = grid.M_values[mi];
        for (int p = 0; p < grid.pairs_per_M; ++p) {
            Rng rng(Rng::derive(grid.seed, 10000 + static_cast<std::uint64_t>(p)));
            const auto [x, y] = grid_sample_pair(sys, M, grid.sample_depth, rng);
            for (double factor : grid.t_factors) fn(mi, natural_time(sys, M, factor), x, y, M);
        }
    }
}

double log_f_branch(const GridEval& e, double c) {
    return e.log_f1 - (c - 1.0) * e.scale_f;
}
double log_h_branch(const GridEval& e, double c) {
    return e.log_h1 - (c - 1.0) * e.scale_h;
}
double log_envelope(const GridEval& e, double c) {
    return std::max(log_f_branch(e, c), log_h_branch(e, c));
}

// Exponent scales where a branch can still be tuned by its c; below this the
// gap is polynomial and belongs to the multiplicative band.
constexpr double kTunableScale = 2.0;

struct EnvelopeFit {
    double c_lower = 1.0;
    double c_upper = 1.0;
    bool fitted = false;
    bool clamped = false;
};

// Fit one exponent constant per envelope side so the sandwich holds with
// bounded multiplicative band: the lower envelope must decay at least as fast
// as the quantity anywhere on the grid, the upper one at most as slowly.
// Polynomially mismatched points (no tunable branch) are left to the band.
EnvelopeFit fit_envelope(const std::vector<GridEval>& evals) {
    EnvelopeFit fit;
    fit.fitted = true;
    double need_lo = 0;
    double cap_up = std::numeric_limits<double>::infinity();
    for (const GridEval& e : evals) {
        const double env1 = log_envelope(e, 1.0);
        if (env1 > e.log_q) {
            // Envelope above the quantity: raise c_lower until every tunable
            // branch drops underneath.
            double need = 0;
            if (e.log_f1 > e.log_q && e.scale_f >= kTunableScale)
                need = std::max(need, (e.log_f1 - e.log_q) / e.scale_f);
            if (e.log_h1 > e.log_q && e.scale_h >= kTunableScale)
                need = std::max(need, (e.log_h1 - e.log_q) / e.scale_h);
            need_lo = std::max(need_lo, need);
        } else if (e.log_q > env1) {
            // Quantity above the envelope: some branch must stay within reach
            // after lowering c_upper; take the least demanding one.
            double best = -std::numeric_limits<double>::infinity();
            if (e.scale_f >= kTunableScale)
                best = std::max(best, 1.0 - (e.log_q - e.log_f1) / e.scale_f);
            if (e.scale_h >= kTunableScale)
                best = std::max(best, 1.0 - (e.log_q - e.log_h1) / e.scale_h);
            if (std::isfinite(best)) cap_up = std::min(cap_up, best);
        }
    }
    fit.c_lower = 1.0 + need_lo;
    fit.c_upper = std::isfinite(cap_up) ? std::min(1.0, cap_up) : 1.0;
    if (fit.c_upper < 1e-3) {
        fit.c_upper = 1e-3;
        fit.clamped = true;
    }
    return fit;
}

// Shared verdict assembly: global and per-level extremes of the two ratio
// sides, then finiteness plus the cross-level stability band.
BoundReport assemble_report(const std::string& claim, const GridSpec& grid,
                            const std::vector<GridEval>& evals, double c_lower, double c_upper) {
    BoundReport report;
    report.claim = claim;
    report.grid = grid;
    Extremes all;
    std::vector<Extremes> per_M(grid.M_values.size());
    bool finite = true;
    for (const GridEval& e : evals) {
        const double log_lo = e.log_q - log_envelope(e, c_lower);
        const double log_hi = e.log_q - log_envelope(e, c_upper);
        if (!std::isfinite(log_lo) || !std::isfinite(log_hi)) {
            finite = false;
            continue;
        }
        per_M[e.mi].feed_low(log_lo, e.t, e.M, e.x, e.y);
        per_M[e.mi].feed_high(log_hi, e.t, e.M, e.x, e.y);
        all.feed_low(log_lo, e.t, e.M, e.x, e.y);
        all.feed_high(log_hi, e.t, e.M, e.x, e.y);
    }
    for (const Extremes& ex : per_M) {
        report.per_M_log_min.push_back(ex.log_min);
        report.per_M_log_max.push_back(ex.log_max);
    }
    report.log_min_ratio = all.log_min;
    report.log_max_ratio = all.log_max;
    report.worst_low = all.low;
    report.worst_high = all.high;
    const auto drift = [](const std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *hi - *lo;
    };
    const double drift_min = drift(report.per_M_log_min);
    const double drift_max = drift(report.per_M_log_max);
    report.stats["drift_min"] = std::exp(drift_min);
    report.stats["drift_max"] = std::exp(drift_max);
    report.stats["c_lower"] = c_lower;
    report.stats["c_upper"] = c_upper;
    report.pass = finite && std::isfinite(report.log_min_ratio) &&
                  std::isfinite(report.log_max_ratio) &&
                  drift_min < std::log(grid.stability) && drift_max < std::log(grid.stability);
    if (!finite) report.notes.push_back("nonfinite ratio encountered; grid point skipped");
    report.notes.push_back("t = factor * L^(M d_w) per level");
    return report;
}

// Resolve the envelope constants: caller-supplied values win; the defaults
// (both 1.0) mean "fit them on this grid", since a single shared exponent
// cannot bound these ratios over several decades of t.
EnvelopeFit resolve_envelope(const KernelParams& params, const std::vector<GridEval>& evals,
                             BoundReport& tag) {
    if (params.c_lower != 1.0 || params.c_upper != 1.0) {
        EnvelopeFit given;
        given.c_lower = params.c_lower;
        given.c_upper = params.c_upper;
        tag.notes.push_back("envelope exponent pair supplied by caller");
        return given;
    }
    EnvelopeFit fit = fit_envelope(evals);
    tag.notes.push_back("envelope exponent pair fitted on this grid");
    if (fit.clamped) tag.notes.push_back("upper exponent clamped at 1e-3; band absorbs the rest");
    return fit;
}

// Exponent scale of the h profile: a^(d_w/(d_J-1)) with a = max(L^M/t^(1/d_w), 1).
double h_scale(const FractalSystem& sys, double t, int M) {
    const DimensionSet& d = sys.dims();
    const double log_a =
        std::max(M * std::log(sys.L()) - std::log(t) / d.d_w, 0.0);
    return std::exp(log_a * d.d_w / (d.d_J - 1.0));
}

// Exponent scale of the f profile at distance r: (r^d_w / t)^(1/(d_J-1)).
double f_scale(const FractalSystem& sys, double t, double r) {
    const DimensionSet& d = sys.dims();
    if (r <= 0) return 0.0;
    return std::exp((d.d_w * std::log(r) - std::log(t)) / (d.d_J - 1.0));
}

// g1 with its own stopping rule: shells accumulate until the tail is small
// against g1 itself, not against the full density (whose base term would end
// the series before any shell enters).
double log_g1_series(const KernelParams& params, const FractalSystem& sys, const Labelling& lab,
                     double t, const Vec2& x, const Vec2& y, int M, const DensityOptions& opts) {
    LogSumExp g1;
    int m = 0;
    while (true) {
        const FiberDecomposition fib = fiber(sys, lab, y, M, m);
        if (m == 0) {
            for (const Vec2& p : fib.B) g1.add(log_g_free(params, t, x, p));
        } else {
            for (const Vec2& p : fib.A[static_cast<std::size_t>(m)])
                g1.add(log_g_free(params, t, x, p));
        }
        if (!g1.empty() &&
            log_tail_bound(sys, params, t, M, m + 1) <= std::log(opts.rel_tol) + g1.log_value())
            return g1.log_value();
        if (m >= opts.m_cap)
            fail(Errc::NoConvergence, "far-fiber series still above tolerance at the shell cap");
        ++m;
    }
}

}  // namespace

GridSpec default_grid(std::uint64_t seed) {
    GridSpec grid;
    grid.t_factors = {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
    grid.M_values = {-1, 0, 1};
    grid.pairs_per_M = 10;
    grid.seed = seed;
    return grid;
}

std::pair<Vec2, Vec2> grid_sample_pair(const FractalSystem& sys, int M, int depth, Rng& rng) {
    const double tol = geom_tol(sys, M);
    Vec2 x = sample_point(sys, M, depth, rng);
    Vec2 y = sample_point(sys, M, depth, rng);
    while (dist(x, y) <= tol) y = sample_point(sys, M, depth, rng);
    return {x, y};
}

BoundReport scan_theorem_1(const KernelParams& params, const FractalSystem& sys,
                           const Labelling& lab, const GridSpec& grid) {
    // Here the surrogate's dominant term matches the f profile at c_eval
    // exactly, so one shared constant already gives a bounded ratio.
    std::vector<GridEval> evals;
    grid_walk(sys, grid, [&](std::size_t mi, double t, const Vec2& x, const Vec2& y, int M) {
        GridEval e;
        e.t = t;
        e.x = x;
        e.y = y;
        e.M = M;
        e.mi = mi;
        e.log_q = g_M_density(params, sys, lab, t, x, y, M).log_value;
        e.log_f1 = log_f_kernel(params, params.c_eval, t, dist(x, y));
        e.log_h1 = log_h_envelope(sys, params, params.c_eval, t, M);
        evals.push_back(e);
    });
    BoundReport report = assemble_report("thm31", grid, evals, 1.0, 1.0);
    report.system = "reflected density vs max(f, h)";
    report.stats["c_lower"] = params.c_eval;
    report.stats["c_upper"] = params.c_eval;
    report.stats["c_eval"] = params.c_eval;
    report.stats["c1_hat"] = std::exp(report.log_min_ratio);
    report.stats["c4_hat"] = std::exp(report.log_max_ratio);
    return report;
}

BoundReport scan_theorem_2(const KernelParams& params, const FractalSystem& sys,
                           const Labelling& lab, const GridSpec& grid) {
    std::vector<GridEval> evals;
    grid_walk(sys, grid, [&](std::size_t mi, double t, const Vec2& x, const Vec2& y, int M) {
        GridEval e;
        e.t = t;
        e.x = x;
        e.y = y;
        e.M = M;
        e.mi = mi;
        const DensityResult g = g_M_density(params, sys, lab, t, x, y, M);
        e.log_q = logaddexp(g.log_g1, g.log_g2);
        const double d = delta(sys, x, y, M);
        e.log_f1 = log_f_kernel(params, 1.0, t, d);
        e.scale_f = f_scale(sys, t, d);
        e.log_h1 = log_h_envelope(sys, params, 1.0, t, M);
        e.scale_h = h_scale(sys, t, M);
        evals.push_back(e);
    });
    BoundReport report;
    const EnvelopeFit fit = resolve_envelope(params, evals, report);
    BoundReport scan = assemble_report("thm32", grid, evals, fit.c_lower, fit.c_upper);
    scan.notes.insert(scan.notes.begin(), report.notes.begin(), report.notes.end());
    scan.system = "boundary excess vs max(f(delta), h)";
    scan.stats["c_eval"] = params.c_eval;
    scan.stats["c_lo_hat"] = std::exp(scan.log_min_ratio);
    scan.stats["c_hi_hat"] = std::exp(scan.log_max_ratio);
    return scan;
}

BoundReport scan_lemma_tail(const KernelParams& params, const FractalSystem& sys,
                            const Labelling& lab, const GridSpec& grid) {
    std::vector<GridEval> evals;
    grid_walk(sys, grid, [&](std::size_t mi, double t, const Vec2& x, const Vec2& y, int M) {
        GridEval e;
        e.t = t;
        e.x = x;
        e.y = y;
        e.M = M;
        e.mi = mi;
        e.log_q = log_g1_series(params, sys, lab, t, x, y, M, DensityOptions{});
        e.log_h1 = log_h_envelope(sys, params, 1.0, t, M);
        e.scale_h = h_scale(sys, t, M);
        evals.push_back(e);
    });
    BoundReport report;
    const EnvelopeFit fit = resolve_envelope(params, evals, report);
    BoundReport scan = assemble_report("lem36", grid, evals, fit.c_lower, fit.c_upper);
    scan.notes.insert(scan.notes.begin(), report.notes.begin(), report.notes.end());
    scan.system = "far-fiber sum vs h";
    scan.stats["c_eval"] = params.c_eval;
    scan.stats["c21_hat"] = std::exp(scan.log_min_ratio);
    scan.stats["c23_hat"] = std::exp(scan.log_max_ratio);
    return scan;
}

BoundReport scan_corollary(const KernelParams& params, const FractalSystem& sys,
                           const Labelling& lab, const GridSpec& grid) {
    BoundReport report;
    report.claim = "cor37";
    report.grid = grid;
    report.system = "regime bands of the reflected density";
    Extremes all;
    Extremes band[3];  // A, B, C
    std::int64_t count[3] = {0, 0, 0};
    const double d_w = sys.dims().d_w;
    const double d_s = sys.dims().d_s;
    const double d_f = sys.dims().d_f;
    grid_walk(sys, grid, [&](std::size_t, double t, const Vec2& x, const Vec2& y, int M) {
        const double t_nat = natural_time(sys, M, 1.0);
        const double sep_pow = std::pow(dist(x, y), d_w);
        const DensityResult g = g_M_density(params, sys, lab, t, x, y, M);
        int regime;
        double log_band;
        if (t > t_nat) {
            regime = 0;  // late: mass spread over K^<M>
            log_band = g.log_value + d_f * M * std::log(sys.L());
        } else if (t > sep_pow) {
            regime = 1;  // intermediate: on-diagonal profile
            log_band = g.log_value + (d_s / 2.0) * std::log(t);
        } else {
            regime = 2;  // early: free off-diagonal profile
            log_band = g.log_value - log_f_kernel(params, params.c_eval, t, dist(x, y));
        }
        band[regime].feed(log_band, t, M, x, y);
        ++count[regime];
        all.feed(log_band, t, M, x, y);
    });
    report.log_min_ratio = all.log_min;
    report.log_max_ratio = all.log_max;
    report.worst_low = all.low;
    report.worst_high = all.high;
    report.pass = true;
    const char* names[3] = {"A", "B", "C"};
    for (int r = 0; r < 3; ++r) {
        const std::string n = names[r];
        report.stats[n + "_count"] = static_cast<double>(count[r]);
        if (count[r] == 0) {
            report.notes.push_back("regime " + n + " is empty on this grid");
            report.pass = false;
            continue;
        }
        const double spread = band[r].log_max - band[r].log_min;
        report.stats[n + "_log_lo"] = band[r].log_min;
        report.stats[n + "_log_hi"] = band[r].log_max;
        report.stats[n + "_band"] = std::exp(spread);
        if (!(spread < std::log(grid.stability))) report.pass = false;
    }
    report.notes.push_back("band normalizations differ per regime; headline extremes pool them");
    return report;
}

BoundReport check_cardinalities(const FractalSystem& sys, const Labelling* lab, int M, int m_max,
                                const std::vector<Vec2>& sample_ys) {
    BoundReport report;
    report.claim = "card";
    report.system = lab ? "fiber shells, labelled enumeration" : "fiber shells, address census";
    const double N = sys.N();
    bool pass = true;
    std::int64_t siblings_touching = -1, siblings_detached = -1;

    if (lab) {
        if (sample_ys.empty()) fail(Errc::GridEmpty, "cardinality check needs base points");
        double worst_roundtrip = 0;
        const double tol = geom_tol(sys, M);
        for (const Vec2& y : sample_ys) {
            const FiberDecomposition fib = fiber(sys, *lab, y, M, m_max);
            for (int m = 0; m <= m_max; ++m) {
                const double expected = std::pow(N, m) * (N - 1.0);
                if (static_cast<double>(fib.A[static_cast<std::size_t>(m)].size()) != expected)
                    pass = false;
            }
            if (static_cast<std::int64_t>(fib.B.size() + fib.C.size()) !=
                static_cast<std::int64_t>(N) - 1)
                pass = false;
            if (fib.C.empty()) pass = false;  // some sibling must touch the base complex
            if (siblings_detached < 0) {
                siblings_detached = static_cast<std::int64_t>(fib.B.size());
                siblings_touching = static_cast<std::int64_t>(fib.C.size());
            } else if (siblings_detached != static_cast<std::int64_t>(fib.B.size()) ||
                       siblings_touching != static_cast<std::int64_t>(fib.C.size())) {
                pass = false;  // the split is a property of the cells, not of y
            }
            // Every enumerated preimage must project back onto the base point.
            for (int m = 0; m <= m_max; ++m) {
                for (const Vec2& p : fib.A[static_cast<std::size_t>(m)])
                    worst_roundtrip = std::max(worst_roundtrip, dist(project(sys, *lab, p, M), y));
            }
        }
        if (worst_roundtrip > tol) pass = false;
        report.stats["roundtrip_max_err"] = worst_roundtrip;
        report.stats["points_checked"] = static_cast<double>(sample_ys.size());
    } else {
        // No labelling: count host cells per shell straight from the address
        // census and classify the first shell geometrically.
        std::vector<std::int64_t> shell_count(static_cast<std::size_t>(m_max) + 2, 0);
        const double s = sys.pow_L(M);
        const double tol = geom_tol(sys, M);
        std::vector<Vec2> corners;
        for (const Vec2& v : sys.essential_fixed_points()) corners.push_back(s * v);
        siblings_detached = siblings_touching = 0;
        visit_cells(sys, M, M + m_max + 1, [&](const CellAddress& a, const Vec2&) {
            int shell = 0;
            for (std::size_t t = 0; t < a.word.size(); ++t)
                if (a.word[t] != 1) shell = static_cast<int>(t) + 1;
            ++shell_count[static_cast<std::size_t>(shell)];
            if (shell != 1) return;
            int shared = 0;
            for (const Vec2& v : cell_from_address(sys, a).vertices)
                for (const Vec2& z : corners)
                    if (dist(v, z) <= tol) ++shared;
            if (shared == 0)
                ++siblings_detached;
            else if (shared == 1)
                ++siblings_touching;
            else
                fail(Errc::NotNested, "two cells of the same level share more than one vertex");
        });
        for (int m = 0; m <= m_max; ++m) {
            const double expected = std::pow(N, m) * (N - 1.0);
            if (static_cast<double>(shell_count[static_cast<std::size_t>(m) + 1]) != expected)
                pass = false;
        }
        if (siblings_detached + siblings_touching != static_cast<std::int64_t>(N) - 1)
            pass = false;
        if (siblings_touching == 0) pass = false;
        report.stats["points_checked"] = 0.0;
    }
    report.stats["m_max"] = m_max;
    report.stats["level"] = M;
    report.stats["detached_siblings"] = static_cast<double>(siblings_detached);
    report.stats["touching_siblings"] = static_cast<double>(siblings_touching);
    report.pass = pass;
    return report;
}

BoundReport check_metric(const FractalSystem& sys, const std::vector<int>& M_values,
                         int samples_per_M, std::uint64_t seed) {
    BoundReport report;
    report.claim = "metric";
    report.system = "chain metric growth";
    report.grid.M_values = M_values;
    report.grid.pairs_per_M = samples_per_M;
    report.grid.seed = seed;
    const GrowthConstants fit = growth_constants(sys, M_values, samples_per_M, seed);
    const double d_f = sys.dims().d_f;
    bool pass = true;

    // Held-out pairs from disjoint streams must satisfy the certified pair.
    std::int64_t violations = 0;
    Extremes holdout;
    for (std::size_t i = 0; i < M_values.size(); ++i) {
        const int M = M_values[i];
        const CellGraph graph = build_cell_graph(sys, M, M + 2);
        const std::uint64_t stream =
            Rng::derive(seed, 100000 + static_cast<std::uint64_t>(static_cast<std::int64_t>(M) + 512));
        for (int p = 0; p < samples_per_M; ++p) {
            const auto [x, y] = metric_sample_pair(sys, M, stream, static_cast<std::uint64_t>(p));
            const MetricResult r = d_M(sys, graph, x, y);
            if (r.lower_bound) continue;
            const double sep = dist(x, y);
            const double lo = fit.c17_cert * sep / sys.pow_L(M);
            const double hi = std::max(
                2.0, fit.c18_cert * std::pow(sep, d_f) / std::pow(static_cast<double>(sys.N()), M));
            if (r.d < lo || r.d > hi) {
                ++violations;
                holdout.feed(std::log(static_cast<double>(r.d)), 0.0, M, x, y);
            }
        }
    }
    if (violations > 0) pass = false;

    const auto drift = [](const std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        return *lo > 0 ? *hi / *lo : std::numeric_limits<double>::infinity();
    };
    const double drift17 = drift(fit.per_M_c17);
    const double drift18 = drift(fit.per_M_c18);
    if (!(drift17 < 1.5) || !(drift18 < 1.5)) pass = false;

    int n_common = -1;
    bool n_stable = true;
    for (int M : M_values) {
        const int n = kumagai_n(sys, M);
        if (n_common < 0) n_common = n;
        n_stable = n_stable && n == n_common;
    }
    if (!n_stable || n_common <= 0) pass = false;

    for (std::size_t i = 0; i < M_values.size(); ++i) {
        report.per_M_log_min.push_back(std::log(fit.per_M_c17[i]));
        report.per_M_log_max.push_back(std::log(fit.per_M_c18[i]));
    }
    report.log_min_ratio = std::log(fit.c17_hat);
    report.log_max_ratio = std::log(fit.c18_hat);
    report.worst_low = holdout.low;
    report.worst_high = holdout.high;
    report.stats["c17_hat"] = fit.c17_hat;
    report.stats["c18_hat"] = fit.c18_hat;
    report.stats["c17_cert"] = fit.c17_cert;
    report.stats["c18_cert"] = fit.c18_cert;
    report.stats["c17_drift"] = drift17;
    report.stats["c18_drift"] = drift18;
    report.stats["holdout_violations"] = static_cast<double>(violations);
    report.stats["chain_bound"] = static_cast<double>(n_common);
    report.stats["chain_bound_stable"] = n_stable ? 1.0 : 0.0;
    report.notes.push_back(fit.description);
    report.pass = pass;
    return report;
}

}  // namespace nh
