#pragma once

#include <cmath>
#include <limits>

#include "nestedheat/folding.hpp"

namespace nh {

// Calibration of the kernel envelopes.  c_eval drives the surrogate free
// kernel; c_lower / c_upper are the envelope constants quoted in reports.
// c18 is the metric growth constant required by the tail bound (NaN until
// supplied from a growth scan).
struct KernelParams {
    DimensionSet dims;
    double c_lower = 1.0;
    double c_upper = 1.0;
    double c_eval = 1.0;
    double c18 = std::numeric_limits<double>::quiet_NaN();
};

// Off-diagonal profile f_c(t,r) = t^{-d_s/2} exp(-c (r^{d_w}/t)^{1/(d_J-1)}).
double f_kernel(const KernelParams& params, double c, double t, double r);
double log_f_kernel(const KernelParams& params, double c, double t, double r);

// Boundary profile h_c(t,M) = L^{-d_f M} a^{d_f - d_w/(d_J-1)}
//                             exp(-c a^{d_w/(d_J-1)}),  a = max(L^M/t^{1/d_w}, 1).
double h_envelope(const FractalSystem& sys, const KernelParams& params, double c, double t, int M);
double log_h_envelope(const FractalSystem& sys, const KernelParams& params, double c, double t,
                      int M);

enum class FreeKernelBackend { surrogate, mc };

// Free-motion transition density.  The surrogate backend is f_{c_eval}(t,|x-y|);
// the Monte Carlo backend needs a trajectory store this build does not attach.
double g_free(const KernelParams& params, double t, const Vec2& x, const Vec2& y,
              FreeKernelBackend backend = FreeKernelBackend::surrogate);
double log_g_free(const KernelParams& params, double t, const Vec2& x, const Vec2& y);

// Reflected density as the fiber series, with value = g_base + g1 + g2:
// g_base is the free term, g1 collects shells m >= 1 plus the detached m=0
// cells, g2 the m=0 cells touching K^<M>.  Logs accompany each part so ratio
// scans stay finite far outside double range.
struct DensityResult {
    double value = 0;
    double g1 = 0;
    double g2 = 0;
    double g_base = 0;
    double log_value = -std::numeric_limits<double>::infinity();
    double log_g1 = -std::numeric_limits<double>::infinity();
    double log_g2 = -std::numeric_limits<double>::infinity();
    double log_g_base = -std::numeric_limits<double>::infinity();
    int m_used = 0;
    double tail_bound = 0;
    bool converged = true;
};

struct DensityOptions {
    double rel_tol = 1e-9;
    int m_cap = 40;
    bool allow_partial = false;  // return flagged partial instead of throwing
};

DensityResult g_M_density(const KernelParams& params, const FractalSystem& sys,
                          const Labelling& lab, double t, const Vec2& x, const Vec2& y, int M,
                          const DensityOptions& opts = {});

// Upper bound on the discarded series tail starting at shell m_start, built
// from the shell count N^m(N-1), the metric lower bound on shell distances,
// and a geometric-ratio remainder once consecutive terms at least halve.
double tail_bound(const FractalSystem& sys, const KernelParams& params, double t, int M,
                  int m_start);
double log_tail_bound(const FractalSystem& sys, const KernelParams& params, double t, int M,
                      int m_start);

// g_M - g computed as g1 + g2 (never as a subtraction).
double g_difference(const KernelParams& params, const FractalSystem& sys, const Labelling& lab,
                    double t, const Vec2& x, const Vec2& y, int M, const DensityOptions& opts = {});

}  // namespace nh
