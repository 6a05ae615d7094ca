#pragma once

// Deterministic solvers for f_t + v f_x = f_vv on [0,1] x [-L, L] with
// absorbing walls: f(0, v) = 0 for v > 0 and f(1, v) = 0 for v < 0.
//
// Two schemes share the PhaseField layout:
//  - "upwind": flux-form first-order upwind in x by sign(v), three-point
//    diffusion in v, Lie splitting between the two;
//  - "implicit": unsplit backward Euler with upwind x differences, solved
//    by block Gauss-Seidel over v columns; no step limit, so strongly
//    graded grids are affordable;
//  - "regularized": semi-Lagrangian transport along the cut-off speed
//    beta_eps(v) + (v - beta_eps(v)) eta_eps(x), followed by the jump
//    operator Q^eps in v.

#include "kfp/phase_field.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace kfp::solver {

// Smoothing cut-offs of the regularized problem.
class CutoffSet {
public:
    explicit CutoffSet(double eps);

    double eps() const { return eps_; }
    // 0 for |v| < eps^2, v for |v| > 2 eps^2, C^2 in between, |beta| <= |v|.
    double beta(double v) const;
    // 0 near the walls (x < eps or x > 1 - eps), 1 on (2 eps, 1 - 2 eps).
    double eta(double x) const;
    double eta_prime(double x) const;
    // Speed of the regularized characteristics and its x-derivative.
    double speed(double x, double v) const;
    double speed_dx(double x, double v) const;
    // Mollifier: even, supported on [-3, 3], zeroth and second moments 1.
    static double xi(double zeta);

    // Jump weights on a uniform v lattice of spacing dv: pairs (k, w_k) with
    // sum w_k = 1, sum w_k k = 0 and sum w_k (k dv / eps)^2 = 1 exactly.
    std::vector<std::pair<int, double>> lattice_weights(double dv) const;

private:
    double eps_;
};

struct StepStats {
    double absorbed_left = 0.0;   // mass through x = 0 this step
    double absorbed_right = 0.0;  // mass through x = 1 this step
    double leakage = 0.0;         // mass lost at v = +-L this step
    double defect = 0.0;          // unexplained mass change (regularized transport only)
    double flux_left = 0.0;       // outgoing flux rates at the start of the step
    double flux_right = 0.0;
    int sweeps = 0;               // implicit scheme: Gauss-Seidel passes used
};

// Largest dt allowed by the stability contract, times cfl (0 < cfl <= 1).
double stable_dt(const PhaseField& f, double cfl, const std::string& scheme, double eps = 0.0);

StepStats step_upwind(PhaseField& f, double dt);
StepStats step_implicit(PhaseField& f, double dt);
StepStats step_regularized(PhaseField& f, double dt, const CutoffSet& cut);

// (2/eps^2) int [f(x, v + eps z) - f(x, v)] xi(z) dz on the v lattice;
// values beyond +-L count as zero.  Requires uniform v nodes.
PhaseField jump_q_eps(const PhaseField& f, const CutoffSet& cut);

struct JacobianReport {
    double max_deviation = 0.0;  // max |dX(s)/dx - 1| over samples and s in [0, T]
    double bound = 0.0;          // eps C T exp(eps C T)
    double c_const = 0.0;        // C = sup |d speed/dx| / eps
    bool within_bound = false;
};

// Integrates the regularized characteristics backward over [0, T] from each
// sample (x, v) together with the variational equation for dX/dx.
JacobianReport jacobian_bounds_check(const CutoffSet& cut, double T,
                                     const std::vector<std::pair<double, double>>& samples);

struct InitialData {
    std::string kind = "gaussian";  // gaussian | ball | product | blobs | zero
    double x0 = 0.5, v0 = 0.0;
    double sx = 0.1, sv = 0.5;      // gaussian widths
    double amplitude = 1.0;
    double radius = 0.2;            // ball radius in the (x, v) plane
    double edge = 0.05;             // smooth fall-off width of the ball
    unsigned seed = 1;
    int blobs = 4;
};

double initial_value(const InitialData& d, double x, double v);
void fill_initial(PhaseField& f, const InitialData& d);

struct SolverConfig {
    GridSpec grid;
    std::string scheme = "upwind";
    double eps = 0.05;  // regularized scheme only
    double cfl = 0.4;
    double dt = 0.0;  // > 0: fixed step, rejected when above the stability limit
    double t_end = 1.0;
    std::vector<double> snapshot_times;
    int series_every = 1;
};

using RegionFn = std::function<bool(double x, double v)>;

struct Trajectory {
    std::vector<PhaseField> snapshots;
    std::vector<double> t, mass, flux_left, flux_right, leakage, sup;
    std::vector<double> region_sup;  // filled when a region is supplied
    double absorbed_left = 0.0, absorbed_right = 0.0, leaked = 0.0, defect = 0.0;
    double dt = 0.0;
    long steps = 0;
    // max over steps of |dM + absorbed + leakage| / M(0); zero up to rounding
    // for the upwind scheme
    double bookkeeping_error = 0.0;
};

Trajectory run_solve(const SolverConfig& cfg, const PhaseField& f0,
                     const RegionFn& region = nullptr);

}  // namespace kfp::solver
