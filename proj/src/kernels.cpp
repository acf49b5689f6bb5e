#include "nestedheat/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nestedheat/kahan.hpp"

namespace nh {
namespace {

void check_time(double t) {
    if (!(t > 0) || !std::isfinite(t)) fail(Errc::BadTime, "time must be positive and finite");
}

// Shell-m preimages sit at |x - y'|^{d_f} >= (2/c18) N^{M+m-1}; through the
// profile this turns the m-th shell bound into
//   term(m) = (N-1) N^m t^{-d_s/2} exp(-A q^m),
// with q = N^{d_w / (d_f (d_J - 1))} and A collecting the constants below.
struct TailSeries {
    double log_count0;  // log(N-1)
    double log_N;
    double log_t_part;  // -(d_s/2) log t
    double A;
    double q;

    TailSeries(const FractalSystem& sys, const KernelParams& p, double t, int M) {
        if (!(p.c18 > 0))
            fail(Errc::MissingConstants, "tail bound needs the metric growth constant");
        const double N = sys.N();
        const double e1 = p.dims.d_w / (p.dims.d_f * (p.dims.d_J - 1.0));
        log_count0 = std::log(N - 1.0);
        log_N = std::log(N);
        log_t_part = -(p.dims.d_s / 2.0) * std::log(t);
        q = std::pow(N, e1);
        A = p.c_eval * std::pow(2.0 / p.c18, e1) * std::pow(N, (M - 1) * e1) *
            std::pow(t, -1.0 / (p.dims.d_J - 1.0));
    }

    double log_term(int m) const { return log_count0 + m * log_N + log_t_part - A * std::pow(q, m); }
    // log of term(m+1)/term(m); strictly decreasing in m.
    double log_ratio(int m) const { return log_N - A * std::pow(q, m) * (q - 1.0); }
};

}  // namespace

double log_f_kernel(const KernelParams& params, double c, double t, double r) {
    check_time(t);
    if (!(r >= 0)) fail(Errc::BadAddress, "kernel distance must be nonnegative");
    const double arg = std::pow(r, params.dims.d_w) / t;
    return -(params.dims.d_s / 2.0) * std::log(t) -
           c * std::pow(arg, 1.0 / (params.dims.d_J - 1.0));
}

double f_kernel(const KernelParams& params, double c, double t, double r) {
    return std::exp(log_f_kernel(params, c, t, r));
}

double log_h_envelope(const FractalSystem& sys, const KernelParams& params, double c, double t,
                      int M) {
    check_time(t);
    const double log_a =
        std::max(M * std::log(sys.L()) - std::log(t) / params.dims.d_w, 0.0);
    const double e1 = params.dims.d_w / (params.dims.d_J - 1.0);
    return -params.dims.d_f * M * std::log(sys.L()) + (params.dims.d_f - e1) * log_a -
           c * std::exp(e1 * log_a);
}

double h_envelope(const FractalSystem& sys, const KernelParams& params, double c, double t,
                  int M) {
    return std::exp(log_h_envelope(sys, params, c, t, M));
}

double log_g_free(const KernelParams& params, double t, const Vec2& x, const Vec2& y) {
    return log_f_kernel(params, params.c_eval, t, dist(x, y));
}

double g_free(const KernelParams& params, double t, const Vec2& x, const Vec2& y,
              FreeKernelBackend backend) {
    if (backend == FreeKernelBackend::mc)
        fail(Errc::MCUnavailable, "no trajectory store is attached to this build");
    return std::exp(log_g_free(params, t, x, y));
}

double log_tail_bound(const FractalSystem& sys, const KernelParams& params, double t, int M,
                      int m_start) {
    check_time(t);
    if (m_start < 1) fail(Errc::BadAddress, "tail starts at shell 1 or later");
    const TailSeries series(sys, params, t, M);
    LogSumExp sum;
    int m = m_start;
    // Explicit terms while consecutive terms may shrink slower than 1/2; the
    // ratio is monotone, so everything past the switch point is dominated by
    // a geometric series with the ratio at the first excluded shell.
    while (series.log_ratio(m) >= std::log(0.5)) {
        sum.add(series.log_term(m));
        ++m;
        if (m - m_start > 1000)
            fail(Errc::NoConvergence, "tail ratios failed to contract");
    }
    const double rho = std::exp(series.log_ratio(m));
    sum.add(series.log_term(m) - std::log1p(-rho));
    return sum.log_value();
}

double tail_bound(const FractalSystem& sys, const KernelParams& params, double t, int M,
                  int m_start) {
    return std::exp(log_tail_bound(sys, params, t, M, m_start));
}

DensityResult g_M_density(const KernelParams& params, const FractalSystem& sys,
                          const Labelling& lab, double t, const Vec2& x, const Vec2& y, int M,
                          const DensityOptions& opts) {
    check_time(t);
    containing_cells(sys, x, M, M);  // both arguments must lie in the base complex
    containing_cells(sys, y, M, M);
    DensityResult out;
    out.log_g_base = log_g_free(params, t, x, y);

    // Summing per cell (not per distinct preimage) makes lattice-vertex base
    // points work unchanged: a vertex preimage repeats once per incident cell,
    // which is exactly its rank weight.
    LogSumExp g1;  // detached first-shell cells + shells m >= 1
    LogSumExp g2;  // first-shell cells touching the base complex
    const double log_tol = std::log(opts.rel_tol);
    std::vector<Vec2> corners;
    for (const Vec2& v : sys.essential_fixed_points()) corners.push_back(sys.pow_L(M) * v);
    const double tol = geom_tol(sys, M);
    int m = 0;
    bool done = false;
    while (!done) {
        visit_cells(sys, M, M + m + 1, [&](const CellAddress& a, const Vec2& tau) {
            int shell = 0;
            for (std::size_t d = 0; d < a.word.size(); ++d)
                if (a.word[d] != 1) shell = static_cast<int>(d) + 1;
            if (shell != m + 1) return;  // only the newly exposed shell
            const int r = rotation_of(sys, lab, a);
            const Vec2 preimage = apply_rotation_inverse(sys, M, r, y) + tau;
            if (m >= 1) {
                g1.add(log_g_free(params, t, x, preimage));
                return;
            }
            int shared = 0;
            for (const Vec2& v : cell_from_address(sys, a).vertices)
                for (const Vec2& z : corners)
                    if (dist(v, z) <= tol) ++shared;
            if (shared > 1)
                fail(Errc::NotNested, "two cells of the same level share more than one vertex");
            (shared == 1 ? g2 : g1).add(log_g_free(params, t, x, preimage));
        });
        out.m_used = m;
        double log_total = out.log_g_base;
        if (!g1.empty()) log_total = logaddexp(log_total, g1.log_value());
        if (!g2.empty()) log_total = logaddexp(log_total, g2.log_value());
        const double log_tail = log_tail_bound(sys, params, t, M, m + 1);
        out.tail_bound = std::exp(log_tail);
        if (log_tail <= log_tol + log_total) {
            done = true;
        } else if (m >= opts.m_cap) {
            out.converged = false;
            if (!opts.allow_partial) {
                std::ostringstream os;
                os << "series still above tolerance after shell " << m;
                fail(Errc::NoConvergence, os.str());
            }
            done = true;
        } else {
            ++m;
        }
    }
    out.log_g1 = g1.log_value();
    out.log_g2 = g2.log_value();
    out.g_base = std::exp(out.log_g_base);
    out.g1 = g1.empty() ? 0.0 : std::exp(out.log_g1);
    out.g2 = g2.empty() ? 0.0 : std::exp(out.log_g2);
    double log_total = out.log_g_base;
    if (!g1.empty()) log_total = logaddexp(log_total, out.log_g1);
    if (!g2.empty()) log_total = logaddexp(log_total, out.log_g2);
    out.log_value = log_total;
    out.value = std::exp(log_total);
    return out;
}

double g_difference(const KernelParams& params, const FractalSystem& sys, const Labelling& lab,
                    double t, const Vec2& x, const Vec2& y, int M, const DensityOptions& opts) {
    const DensityResult r = g_M_density(params, sys, lab, t, x, y, M, opts);
    return r.g1 + r.g2;
}

}  // namespace nh
