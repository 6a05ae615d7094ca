#pragma once

// Post-processing of trajectories: singular-set amplitude and mass series,
// decay and Hölder fits, the sequence-lemma rate, tightness in v and scaled
// derivatives near the grazing points.

#include "kfp/grid_solver.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace kfp::analysis {

// S: |x| + |v|^3 <= rho^3 or |x - 1| + |v|^3 <= rho^3.  Q is its complement
// and Q_E the complement of S with rho halved.
struct RegionSpec {
    double rho = 0.2;

    bool in_s(double x, double v) const;
    bool in_half_s(double x, double v) const;
    bool in_q(double x, double v) const { return !in_s(x, v); }
    bool in_qe(double x, double v) const { return !in_half_s(x, v); }
};

struct SeriesReport {
    std::vector<double> t, mass, zeta_s, sup_q, sup, mass_qe;
    std::vector<std::vector<double>> marginal;  // H(v) = int f dx per snapshot
    std::vector<std::vector<double>> wall_flux; // g(v): |v| f at the outflow wall, per snapshot
    std::vector<double> v;
};

SeriesReport compute_series(const solver::Trajectory& traj, const RegionSpec& region);

struct LineFit {
    double slope = 0.0, intercept = 0.0, slope_se = 0.0, r2 = 0.0;
    int n = 0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct DecayFit {
    double kappa = 0.0;
    double t_lo = 0.0, t_hi = 0.0;
    double r2 = 0.0;
    double stderr_ = 0.0;
    double intercept = 0.0;
    int points = 0;
};

// Least squares of log y on t over [t_lo, t_hi].
DecayFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y, double t_lo,
                         double t_hi);
// Longest suffix window whose local log-slopes (four equal sub-windows)
// vary by less than rel_var of their mean.
DecayFit fit_exponential_auto(const std::vector<double>& t, const std::vector<double>& y,
                              double rel_var = 0.05);

using FieldFn = std::function<double(double x, double v)>;

struct HolderFit {
    double exponent_x = 0.0, se_x = 0.0;
    double exponent_v = 0.0, se_v = 0.0;
    int levels_x = 0, levels_v = 0;
};

struct HolderOptions {
    int kx_lo = 4, kx_hi = 12;      // x in [2^-kx_hi, 2^-kx_lo]
    double v_lo = 1.0 / 16.0, v_hi = 0.5;
    int v_levels = 7;               // geometric in |v|
    double x_trace = 1e-12;         // distance from the wall for the v fit
};

// Regresses log f(d, 0) on log d (d = distance to the wall) and
// log f(trace, v) on log |v| along the outgoing side.
HolderFit holder_fit(const FieldFn& f, int wall, const HolderOptions& opt = {});
// Same on a snapshot; the v fit uses the first cell next to the wall.
HolderFit holder_fit(const PhaseField& snap, int wall, const HolderOptions& opt = {});

// mu = max(beta, theta)^{1 / (2 (T + 1))}.
double decay_lemma_rate(double theta, double beta, double A, double C, int T);

struct SequenceCheck {
    int families = 0;
    int violations = 0;
    double worst_ratio = 0.0;  // max over n, families of (z_n + M_n) / (c mu^n)
};

// Random families saturating the lemma's hypotheses; checks
// z_n + M_n <= c mu^n for n <= n_max with
// c = (A + 1) max(z_0 / A, z_1 / A, M_0) / max(beta, theta).
SequenceCheck check_decay_lemma(int families, int n_max, std::uint64_t seed);

struct TightnessResult {
    double B = 0.0;
    double mass = 0.0;
    bool hit_truncation = false;
};

// Smallest node |v| = B with int_{|v| <= B} f >= (1 - delta) M.
TightnessResult tightness_check(const PhaseField& snap, double delta);

struct TightnessSeries {
    std::vector<double> t, B;
    double c_fit = 0.0;  // max B / (1 + ln(1/(delta M)) + t)
    LineFit growth;      // B against t
    bool verified = false;
};
TightnessSeries tightness_series(const solver::Trajectory& traj, double delta);

struct DerivativeScaling {
    double fx = 0.0;   // max (|v|^3 + d) |f_x|
    double fv = 0.0;   // max (|v|^3 + d)^{1/3} |f_v|
    double fvv = 0.0;  // max (|v|^3 + d)^{2/3} |f_vv|
};

// Three-point differences at interior nodes with distance d <= d_max to the
// wall and |v| <= v_max.
DerivativeScaling derivative_scaling_check(const PhaseField& snap, int wall, double d_max = 0.1,
                                           double v_max = 0.5);

struct CascadeReport {
    double c_s = 0.0;    // max over t >= lag of sup_Q(t) / M_QE(t - lag)
    double theta = 0.0;  // max zeta_s(n+1)/zeta_s(n) over steps with zeta_s(n) > c_s M(n-1)
    int cascade_steps = 0;
};

// Series sampled at integer multiples of `lag` (snapshot times).
CascadeReport cascade_check(const SeriesReport& s, double lag = 1.0);

}  // namespace kfp::analysis
