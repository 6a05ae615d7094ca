#pragma once

// Comparison functions near the grazing points and at large |v|.
//
// Steady states use the similarity variable zeta = v / (9x)^{1/3}.  The
// self-similar super-solution lives in y = x / t^{3/2}, xi = v / t^{1/2},
// where the operator is
//   L[Z] = Z_xixi + (xi/2) Z_xi + ((3/2) y - xi) Z_y
// and Z is a super-solution of the time-dependent problem when L[Z] <= 0.

#include "kfp/grid_solver.hpp"

#include <functional>
#include <string>
#include <vector>

namespace kfp::barriers {

// Cubic Hermite table of a smooth function on a uniform grid.
class HermiteTable {
public:
    HermiteTable() = default;
    HermiteTable(double lo, double hi, std::vector<double> values, std::vector<double> derivs);

    bool contains(double s) const { return s >= lo_ && s <= hi_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double step() const { return h_; }
    double value(double s) const;
    double deriv(double s) const;
    const std::vector<double>& values() const { return val_; }
    const std::vector<double>& derivs() const { return der_; }

private:
    double lo_ = 0.0, hi_ = 0.0, h_ = 1.0;
    std::vector<double> val_, der_;
};

// The profile Lambda for a fixed alpha, tabulated on [-zeta_max, zeta_max]
// and evaluated directly outside.
class SelfSimilarProfile {
public:
    explicit SelfSimilarProfile(double alpha, double zeta_max = 60.0, double step = 0.01);

    double alpha() const { return alpha_; }
    double lambda(double zeta) const;
    double lambda_deriv(double zeta) const;

private:
    double alpha_;
    HermiteTable table_;
};

// x^alpha Lambda(v / (9x)^{1/3}); requires x > 0.
double steady_regular_f0(const SelfSimilarProfile& p, double x, double v);

// Singular steady state at wall k (0 or 1) for alpha < 0:
//   wall 0: x^alpha M(-alpha, 2/3, -v^3/(9x))
//   wall 1: the same with (x, v) -> (1 - x, -v).
// Returns +inf when the value overflows.
double steady_singular(double alpha, int wall, double x, double v);

struct Z0Options {
    double gamma = -1.0;     // <= 0 selects 3 alpha
    double u_max = 22.0;     // table covers |cbrt(z)| <= u_max
    double u_step = 0.02;
    double domination = 0.2; // |R0| <= domination * F0 on the validated region
    int samples = 64;        // per direction on the validation grid
};

struct Z0Sample {
    double y = 0.0, xi = 0.0;
    double ratio = 0.0;   // |R0| / F0
    double margin = 0.0;  // L[Z0] / F0 (must be <= 0)
};

// Z0 = F0 + R0 with R0 = y^{2/3+alpha} phi(z), z = -xi^3/(9y).
class SuperSolutionZ0 {
public:
    SuperSolutionZ0(const SelfSimilarProfile& profile, const Z0Options& opt = {});

    double alpha() const { return alpha_; }
    double gamma() const { return gamma_; }
    double r_max() const { return r_max_; }
    double k_cap() const { return k_cap_; }
    double worst_ratio() const { return worst_ratio_; }
    double worst_margin() const { return worst_margin_; }
    const Z0Sample& worst_sample() const { return worst_; }

    // phi and dphi/dz; outside the table a power-law continuation is used and
    // *extrapolated (when given) is set.
    double phi(double z, bool* extrapolated = nullptr) const;
    double phi_z(double z) const;
    // Residual of z phi'' + (2/3 - z) phi' + (2/3 + alpha) phi + gamma Q / z^{1/3},
    // with phi'' by central differences of the tabulated phi_z at node i.
    double ode_residual_at_node(int i) const;
    int table_size() const { return static_cast<int>(phi_u_.values().size()); }

    double f0(double y, double xi) const;
    double r0(double y, double xi) const;
    double z0(double y, double xi) const { return f0(y, xi) + r0(y, xi); }
    // L[Z0] divided by F0, from the profile and phi equations.
    double margin(double y, double xi) const;
    bool in_region(double y, double xi) const;

    // Validation on the region |xi|^3 + y <= r^3: worst |R0|/F0 and margin.
    struct RegionCheck {
        double worst_ratio = 0.0, worst_margin = -1e300;
        Z0Sample worst_ratio_at, worst_margin_at;
        bool ok = false;
    };
    RegionCheck check_region(double r, int samples) const;

private:
    const SelfSimilarProfile* profile_;
    double alpha_, gamma_;
    double r_max_ = 0.0, k_cap_ = 1.0;
    double worst_ratio_ = 0.0, worst_margin_ = 0.0;
    Z0Sample worst_;
    HermiteTable phi_u_;  // phi as a function of u = cbrt(z)
    double tail_lo_ = 0.0, tail_hi_ = 0.0;  // phi / |u|^{2+3alpha} at the table ends
};

// min{K Z0(x / t^{3/2}, v / t^{1/2}), 1}; 1 outside the validated region.
// *flagged is set when the similarity point lies outside that region.
double fhat_eval(const SuperSolutionZ0& z0, double K, double x, double v, double t,
                 bool* flagged = nullptr);

using BoundFn = std::function<double(double x, double v, double t)>;

struct CompareReport {
    double worst_excess = 0.0;  // max (f - bound) / ||f0||_inf, may be negative
    double x = 0.0, v = 0.0, t = 0.0;
    long nodes_checked = 0;
    bool pass = false;
};

// Max over snapshots and region nodes of (f - bound)/||f0||_inf; passes when
// it is <= tol.
CompareReport compare_super(const solver::Trajectory& traj, double f0_sup, const BoundFn& bound,
                            const solver::RegionFn& region, double tol);

struct EscapeSubSolution {
    double x0 = 0.5, v0 = 1.0;
    double rho = 0.1;
    double delta = 0.05;
    double level = 1.0;  // eps * M: h >= level/2 on B_rho
    double lambda = 0.0; // (2 pi / rho)^4 when left at 0
    double mu = 0.0;     // taper steepness; 0 selects lambda * delta / 8

    double lam() const;
    double h(double x, double v) const;
    // Second derivative of h along (-t, 1): h_vv + t^2 h_xx - 2t h_xv.
    double h_dir2(double x, double v, double t) const;
    double value(double x, double v, double t) const;  // e^{-lambda t} h(x - v t, v)
};

struct EscapeReport {
    double worst_inequality = 0.0;  // min over samples of (h_dir2 + lambda h) / level
    double worst_domination = 0.0;  // max over nodes of (F - f) / level
    double mass_ratio = 0.0;        // M(1)/M(0)
    double shape_bound = 0.0;       // 1 - rho * eps2 / sqrt(2) with eps2 = level / ||f0||_inf
    bool inequality_ok = false, domination_ok = false, decay_ok = false;
    bool vacuous = false;
};

EscapeReport escape_check(const EscapeSubSolution& sub, const solver::Trajectory& traj,
                          double tol);

// Super-solutions of the free equation at large |v|.
struct InfinityBarrier {
    std::string kind;  // quadratic_linear | quadratic_exp | exp_tail
    double A = 1.0;
    double theta = 0.0;

    double value(double v, double t) const;
    // phi_t + v phi_x - phi_vv (phi does not depend on x).
    double residual(double v, double t) const;
};

// For exp_tail the smallest sampled-admissible theta is found by bisection.
// Throws ParameterError when the residual is negative on the samples.
InfinityBarrier infinity_barrier(const std::string& kind, double A = 1.0);

}  // namespace kfp::barriers
