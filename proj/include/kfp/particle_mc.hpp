#pragma once

// Monte Carlo for dX = V dt, dV = sqrt(2) dW with absorption at the walls.
// Each particle owns a counter-based random stream keyed by (seed, index),
// so results do not depend on loop order or thread count.

#include "kfp/grid_solver.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace kfp::mc {

// Philox4x32-10 counter-based generator.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

// Two independent standard normals for (seed, stream, particle, counter).
std::array<double, 2> normal_pair(std::uint64_t seed, std::uint32_t stream, std::uint64_t particle,
                                  std::uint64_t counter);

struct McConfig {
    std::string geometry = "interval";  // interval: walls at 0 and 1; half_line: wall at 0
    std::string scheme = "euler";       // euler (fixed dt) | exact (Gaussian transition, adaptive)
    double dt = 1e-3;                   // euler step; minimum step of the exact scheme
    double dt_max = 1.0;                // exact scheme only
    double adapt_frac = 0.1;            // exact scheme: step <= frac * distance-based scales
    long n = 100000;
    double t_end = 2.0;
    std::uint64_t seed = 1;
    double noise_scale = 1.0;  // 0 turns off the velocity noise
    int threads = 1;
};

enum class Side : std::int8_t { Alive = -1, Left = 0, Right = 1 };

struct ParticleEnsemble {
    std::vector<double> x, v;
    std::vector<double> exit_time, exit_velocity;
    std::vector<Side> side;
    std::vector<std::uint64_t> counter;  // per-particle step counter
    double t = 0.0;
    std::uint64_t seed = 1;

    long size() const { return static_cast<long>(x.size()); }
    long alive() const;
};

// Samples n particles from the density of `init` restricted to the domain.
// kind "point" places every particle at (x0, v0).
ParticleEnsemble make_ensemble(const McConfig& cfg, const solver::InitialData& init);

// Advances every live particle by `steps` Euler-Maruyama steps of size cfg.dt.
void advance_ensemble(ParticleEnsemble& ens, const McConfig& cfg, long steps);

// Runs every particle to absorption or cfg.t_end with the configured scheme.
void run_to_end(ParticleEnsemble& ens, const McConfig& cfg);

struct SurvivalCurve {
    std::vector<double> t, alive_frac, stderr_;
};
SurvivalCurve survival_curve(const ParticleEnsemble& ens, const std::vector<double>& times);

struct ExitHistogram {
    std::vector<double> t_edges, v_edges;
    // counts[(side * nt + it) * nv + iv]; out-of-range samples go to the end bins
    std::vector<long> counts;
    long total = 0;
    bool empty_warning = false;
};
ExitHistogram exit_flux(const ParticleEnsemble& ens, const std::vector<double>& t_edges,
                        const std::vector<double>& v_edges);

// Outgoing mass rate through each wall, averaged over the bins of t_edges,
// normalised by the initial particle count.
struct FluxSeries {
    std::vector<double> t_mid, left, right, left_se, right_se;
};
FluxSeries flux_series(const ParticleEnsemble& ens, const std::vector<double>& t_edges);

}  // namespace kfp::mc
