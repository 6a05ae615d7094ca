#include "kfp/particle_mc.hpp"

#include "kfp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace kfp::mc {

namespace {

constexpr std::uint32_t kStreamMotion = 0;
constexpr std::uint32_t kStreamInit = 1;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo)
{
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline double to_unit(std::uint32_t hi, std::uint32_t lo)
{
    const std::uint64_t a = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
}

std::array<double, 4> uniforms(std::uint64_t seed, std::uint32_t stream, std::uint64_t particle,
                               std::uint64_t counter)
{
    const auto r = philox4x32({static_cast<std::uint32_t>(counter),
                               static_cast<std::uint32_t>(counter >> 32),
                               static_cast<std::uint32_t>(particle), stream},
                              {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    // 32-bit uniforms are enough for the rejection sampler
    return {(r[0] + 0.5) * 0x1.0p-32, (r[1] + 0.5) * 0x1.0p-32, (r[2] + 0.5) * 0x1.0p-32,
            (r[3] + 0.5) * 0x1.0p-32};
}

template <class Body>
void parallel_for(long n, int threads, Body&& body)
{
    threads = std::max(1, threads);
    if (threads == 1 || n < 1000) {
        body(0L, n);
        return;
    }
    std::vector<std::thread> pool;
    const long chunk = (n + threads - 1) / threads;
    for (int k = 0; k < threads; ++k) {
        const long a = k * chunk, b = std::min(n, a + chunk);
        if (a >= b) break;
        pool.emplace_back([&body, a, b] { body(a, b); });
    }
    for (auto& th : pool) th.join();
}

bool inside(const McConfig& cfg, double x)
{
    return cfg.geometry == "half_line" ? x > 0.0 : (x > 0.0 && x < 1.0);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k)
{
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(0xD2511F53u, c[0], hi0, lo0);
        mulhilo(0xCD9E8D57u, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += 0x9E3779B9u;
        k[1] += 0xBB67AE85u;
    }
    return c;
}

std::array<double, 2> normal_pair(std::uint64_t seed, std::uint32_t stream, std::uint64_t particle,
                                  std::uint64_t counter)
{
    const auto r = philox4x32({static_cast<std::uint32_t>(counter),
                               static_cast<std::uint32_t>(counter >> 32),
                               static_cast<std::uint32_t>(particle), stream},
                              {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    const double u1 = to_unit(r[0], r[1]), u2 = to_unit(r[2], r[3]);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
}

long ParticleEnsemble::alive() const
{
    return static_cast<long>(std::count(side.begin(), side.end(), Side::Alive));
}

ParticleEnsemble make_ensemble(const McConfig& cfg, const solver::InitialData& init)
{
    if (cfg.n <= 0) throw ParameterError("make_ensemble: n must be positive");
    if (cfg.geometry != "interval" && cfg.geometry != "half_line")
        throw ParameterError("make_ensemble: unknown geometry '" + cfg.geometry + "'");
    ParticleEnsemble e;
    const long n = cfg.n;
    e.seed = cfg.seed;
    e.x.resize(n);
    e.v.resize(n);
    e.exit_time.assign(n, std::numeric_limits<double>::infinity());
    e.exit_velocity.assign(n, 0.0);
    e.side.assign(n, Side::Alive);
    e.counter.assign(n, 0);

    double bound = init.amplitude;
    if (init.kind == "blobs") bound = init.amplitude * init.blobs;
    const double vbox = 8.0;
    for (long i = 0; i < n; ++i) {
        if (init.kind == "point") {
            if (!inside(cfg, init.x0)) throw ParameterError("make_ensemble: point outside domain");
            e.x[i] = init.x0;
            e.v[i] = init.v0;
            continue;
        }
        bool placed = false;
        for (std::uint64_t k = 0; k < 100000 && !placed; ++k) {
            if (init.kind == "gaussian") {
                const auto z = normal_pair(cfg.seed, kStreamInit, i, k);
                const double x = init.x0 + init.sx * z[0], v = init.v0 + init.sv * z[1];
                if (inside(cfg, x)) {
                    e.x[i] = x;
                    e.v[i] = v;
                    placed = true;
                }
            } else {
                const auto u = uniforms(cfg.seed, kStreamInit, i, k);
                const double x = u[0], v = vbox * (2.0 * u[1] - 1.0);
                if (u[2] * bound <= solver::initial_value(init, x, v)) {
                    e.x[i] = x;
                    e.v[i] = v;
                    placed = true;
                }
            }
        }
        if (!placed) throw ParameterError("make_ensemble: rejection sampler failed");
    }
    return e;
}

void advance_ensemble(ParticleEnsemble& ens, const McConfig& cfg, long steps)
{
    if (!(cfg.dt > 0.0)) throw ParameterError("advance_ensemble: dt must be positive");
    const double dt = cfg.dt;
    const double amp = cfg.noise_scale * std::sqrt(2.0 * dt);
    const bool interval = cfg.geometry != "half_line";
    const double t0 = ens.t;
    parallel_for(ens.size(), cfg.threads, [&](long a, long b) {
        for (long i = a; i < b; ++i) {
            if (ens.side[i] != Side::Alive) continue;
            double X = ens.x[i], V = ens.v[i];
            for (long s = 0; s < steps; ++s) {
                const double z = normal_pair(ens.seed, kStreamMotion, i, ens.counter[i]++)[0];
                const double Xn = X + V * dt;
                const double Vn = V + amp * z;
                if (Xn <= 0.0) {
                    ens.side[i] = Side::Left;
                    ens.exit_time[i] = t0 + dt * (s + X / (X - Xn));
                    ens.exit_velocity[i] = V;
                    break;
                }
                if (interval && Xn >= 1.0) {
                    ens.side[i] = Side::Right;
                    ens.exit_time[i] = t0 + dt * (s + (1.0 - X) / (Xn - X));
                    ens.exit_velocity[i] = V;
                    break;
                }
                X = Xn;
                V = Vn;
            }
            ens.x[i] = X;
            ens.v[i] = V;
        }
    });
    ens.t = t0 + steps * dt;
}

namespace {

// Exact Gaussian transition of (X, V) over a step h chosen from the distance
// to the nearest wall.
void run_exact(ParticleEnsemble& ens, const McConfig& cfg, long a, long b)
{
    const bool interval = cfg.geometry != "half_line";
    const double inv2s3 = 1.0 / (2.0 * std::sqrt(3.0));
    for (long i = a; i < b; ++i) {
        if (ens.side[i] != Side::Alive) continue;
        double X = ens.x[i], V = ens.v[i], t = ens.t;
        while (t < cfg.t_end) {
            const double d = interval ? std::min(X, 1.0 - X) : X;
            double h = std::pow(d, 2.0 / 3.0);
            if (V != 0.0) h = std::min(h, d / std::fabs(V));
            h = std::clamp(cfg.adapt_frac * h, cfg.dt, cfg.dt_max);
            h = std::min(h, cfg.t_end - t);
            const auto z = normal_pair(ens.seed, kStreamMotion, i, ens.counter[i]++);
            const double sh = std::sqrt(h);
            const double Vn = V + cfg.noise_scale * std::sqrt(2.0) * sh * z[0];
            const double Xn = X + V * h +
                              cfg.noise_scale * std::sqrt(2.0) * h * sh * (0.5 * z[0] + inv2s3 * z[1]);
            if (Xn <= 0.0) {
                const double frac = X / (X - Xn);
                ens.side[i] = Side::Left;
                ens.exit_time[i] = t + frac * h;
                ens.exit_velocity[i] = V + frac * (Vn - V);
                break;
            }
            if (interval && Xn >= 1.0) {
                const double frac = (1.0 - X) / (Xn - X);
                ens.side[i] = Side::Right;
                ens.exit_time[i] = t + frac * h;
                ens.exit_velocity[i] = V + frac * (Vn - V);
                break;
            }
            X = Xn;
            V = Vn;
            t += h;
        }
        ens.x[i] = X;
        ens.v[i] = V;
    }
}

}  // namespace

void run_to_end(ParticleEnsemble& ens, const McConfig& cfg)
{
    if (!(cfg.t_end > ens.t)) return;
    if (cfg.scheme == "euler") {
        const long steps = std::lround((cfg.t_end - ens.t) / cfg.dt);
        advance_ensemble(ens, cfg, steps);
        return;
    }
    if (cfg.scheme != "exact") throw ParameterError("run_to_end: unknown scheme '" + cfg.scheme + "'");
    parallel_for(ens.size(), cfg.threads, [&](long a, long b) { run_exact(ens, cfg, a, b); });
    ens.t = cfg.t_end;
}

SurvivalCurve survival_curve(const ParticleEnsemble& ens, const std::vector<double>& times)
{
    std::vector<double> ex;
    for (long i = 0; i < ens.size(); ++i)
        if (ens.side[i] != Side::Alive) ex.push_back(ens.exit_time[i]);
    std::sort(ex.begin(), ex.end());
    SurvivalCurve c;
    const double n = static_cast<double>(ens.size());
    for (double t : times) {
        const auto gone = std::upper_bound(ex.begin(), ex.end(), t) - ex.begin();
        const double p = (n - static_cast<double>(gone)) / n;
        c.t.push_back(t);
        c.alive_frac.push_back(p);
        c.stderr_.push_back(std::sqrt(std::max(p * (1.0 - p), 0.0) / n));
    }
    return c;
}

namespace {

int bin_of(const std::vector<double>& edges, double q)
{
    const int nb = static_cast<int>(edges.size()) - 1;
    const int k = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), q) - edges.begin()) - 1;
    return std::clamp(k, 0, nb - 1);
}

}  // namespace

ExitHistogram exit_flux(const ParticleEnsemble& ens, const std::vector<double>& t_edges,
                        const std::vector<double>& v_edges)
{
    if (t_edges.size() < 2 || v_edges.size() < 2)
        throw ParameterError("exit_flux: need at least one bin in t and v");
    ExitHistogram h;
    h.t_edges = t_edges;
    h.v_edges = v_edges;
    const int nt = static_cast<int>(t_edges.size()) - 1, nv = static_cast<int>(v_edges.size()) - 1;
    h.counts.assign(static_cast<std::size_t>(2) * nt * nv, 0);
    for (long i = 0; i < ens.size(); ++i) {
        if (ens.side[i] == Side::Alive) continue;
        const int s = ens.side[i] == Side::Left ? 0 : 1;
        ++h.counts[(static_cast<std::size_t>(s) * nt + bin_of(t_edges, ens.exit_time[i])) * nv +
                   bin_of(v_edges, ens.exit_velocity[i])];
        ++h.total;
    }
    h.empty_warning = h.total == 0;
    return h;
}

FluxSeries flux_series(const ParticleEnsemble& ens, const std::vector<double>& t_edges)
{
    FluxSeries fs;
    const std::size_t nb = t_edges.size() - 1;
    std::vector<double> l(nb, 0.0), r(nb, 0.0);
    for (long i = 0; i < ens.size(); ++i) {
        if (ens.side[i] == Side::Alive) continue;
        const double te = ens.exit_time[i];
        if (te < t_edges.front() || te >= t_edges.back()) continue;
        const int k = bin_of(t_edges, te);
        (ens.side[i] == Side::Left ? l : r)[k] += 1.0;
    }
    const double n = static_cast<double>(ens.size());
    for (std::size_t k = 0; k < nb; ++k) {
        const double w = t_edges[k + 1] - t_edges[k];
        fs.t_mid.push_back(0.5 * (t_edges[k] + t_edges[k + 1]));
        fs.left.push_back(l[k] / (n * w));
        fs.right.push_back(r[k] / (n * w));
        fs.left_se.push_back(std::sqrt(l[k]) / (n * w));
        fs.right_se.push_back(std::sqrt(r[k]) / (n * w));
    }
    return fs;
}

}  // namespace kfp::mc
