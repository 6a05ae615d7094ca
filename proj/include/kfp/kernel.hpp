#pragma once

// Free-space fundamental solution of f_t + v f_x = f_vv and the boundary
// objects built from it.

#include "kfp/phase_field.hpp"

#include <functional>
#include <vector>

namespace kfp::kernel {

// G(x, v; nu, tau): density at (x, v) after time tau > 0 of a unit mass
// started at (0, nu).
double eval_g(double x, double v, double nu, double tau);

// int int G(x, v; nu, tau) dx dv by nested adaptive quadrature.
double g_mass(double nu, double tau);

// Max over fixed sample points (tau >= 0.1) of |G_tau + v G_x - G_vv| with
// central differences of step h, h/2, h/4, ... (levels values).
std::vector<double> g_pde_residuals(double h, int levels);

struct ChapmanKolmogorov {
    double max_abs_err = 0.0;
    double peak = 0.0;  // max G(., t + s) over the test points
};
// Composes G over [0, t] and [t, t + s] through an intermediate (xi, w)
// integral and compares with G at t + s on a few test points.
ChapmanKolmogorov chapman_kolmogorov(double t, double s, double nu = 0.0);

// Convolution of f0 with G over the grid of f0 (whole-space problem, no walls).
// Throws QuadratureError when the grid does not resolve G at this time.
PhaseField free_propagate(const PhaseField& f0, double t);

// lambda(w, s) for the boundary-limit identity.
using DensityFn = std::function<double(double w, double s)>;

struct LimitRow {
    double x, lhs, rhs, abs_err;
};

struct LimitCheck {
    std::vector<LimitRow> rows;
    bool monotone = false;  // abs_err non-increasing along the x sequence
};

// Compares
//   LHS(x) = int_0^t ds int dw lambda(w,s) G(x, v, w, t-s)
// with its x -> 0+ limit
//   RHS    = lambda(v,t)/v + int_0^t ds int dw lambda(w,s) G(0, v, w, t-s)
// along the given x sequence.  Requires v > 0.
LimitCheck limit_identity_check(const DensityFn& lambda, double v, double t,
                                const std::vector<double>& xs);

// The s-integrand shared by both sides, exposed for testing:
//   int dw lambda(w, t - sigma) G(x, v, w, sigma).
double layer_integrand(const DensityFn& lambda, double x, double v, double t, double sigma);

// Kernel of the boundary-density equation: K(v, w, tau) = v G(0, -v, -w, tau).
double kernel_k(double v, double w, double tau);

struct BoundaryWindow {
    double v0 = -1.0;
    double delta = 0.2;
    double t0 = 1.0;
    int n_v = 41;
    int n_t = 41;
};

struct BoundaryDensity {
    std::vector<double> v, t;
    std::vector<double> lambda;  // lambda[i * t.size() + k] = lambda(v_i, t_k)
    int iterations = 0;
    std::vector<double> increments;  // sup-norm change per Picard step
    std::vector<double> ratios;      // successive increment ratios
    double residual = 0.0;           // sup |lambda - q - K lambda|
    double fitted_a = 0.0;           // |K| <= C exp(-A / tau) on the window
    double fitted_c = 0.0;
    bool converged = false;
};

// Solves lambda = q + int_{t0}^{t} ds int dw lambda(w,s) K(v,w,s-t) on
// (v0 - 2 delta, v0 + 2 delta) x [0, t0] by Picard iteration with trapezoid
// quadrature.  Throws ConvergenceError if the increments stop contracting.
BoundaryDensity solve_boundary_density(const DensityFn& q, const BoundaryWindow& win,
                                       double tol = 1e-10, int max_iter = 200);

struct KernelBoundFit {
    double a = 0.0, c = 0.0;
    bool holds = false;  // max |K| <= C e^{-A/tau} at every sampled tau
};
KernelBoundFit fit_kernel_bound(const BoundaryWindow& win);

// Reverses time and velocity: g(x, v, t) = f(x, -v, T - t).  The v nodes
// must be symmetric about zero.  Output is ordered by increasing time.
std::vector<PhaseField> backward_transform(const std::vector<PhaseField>& snaps, double T);

struct BackwardResidual {
    double max_abs = 0.0;
    double scale = 0.0;  // max of |g_t| + |v g_x| + |g_vv| over the same nodes
};
// Finite-difference residual of -g_t - v g_x - g_vv at interior nodes of the
// middle snapshots, skipping `margin` nodes near every edge.
BackwardResidual backward_residual(const std::vector<PhaseField>& g, int margin);

}  // namespace kfp::kernel
