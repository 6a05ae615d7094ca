#include "kfp/grid_solver.hpp"

#include "kfp/errors.hpp"
#include "kfp/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <string>

namespace kfp::solver {

namespace {
constexpr double kImplicitTol = 1e-13;
constexpr int kImplicitMaxSweeps = 2000;
}  // namespace

namespace {

// Quintic smoothstep: 0 -> 1 on [0, 1] with vanishing first and second
// derivatives at both ends.
double smoothstep(double u)
{
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

double smoothstep_prime(double u)
{
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return 30.0 * u * u * (1.0 - u) * (1.0 - u);
}

double vmax_of(const PhaseField& f)
{
    double m = 0.0;
    for (double v : f.v) m = std::max(m, std::fabs(v));
    return m;
}

bool uniform_nodes(const std::vector<double>& v)
{
    const double h = v[1] - v[0];
    for (std::size_t j = 1; j + 1 < v.size(); ++j)
        if (std::fabs((v[j + 1] - v[j]) - h) > 1e-9 * h) return false;
    return true;
}

void check_finite(const PhaseField& f, double t)
{
    for (int i = 0; i < f.nx(); ++i)
        for (int j = 0; j < f.nv(); ++j)
            if (!std::isfinite(f.at(i, j)))
                throw NumericalAbort("non-finite value in solution at " + format_where(t, i, j), t, i,
                                     j);
}

}  // namespace

CutoffSet::CutoffSet(double eps) : eps_(eps)
{
    if (!(eps > 0.0 && eps < 0.25)) throw ParameterError("CutoffSet: eps must lie in (0, 1/4)");
}

double CutoffSet::beta(double v) const
{
    const double e2 = eps_ * eps_;
    const double a = std::fabs(v);
    if (a <= e2) return 0.0;
    if (a >= 2.0 * e2) return v;
    return v * smoothstep((a - e2) / e2);
}

double CutoffSet::eta(double x) const
{
    if (x <= 0.5) return smoothstep((x - eps_) / eps_);
    return smoothstep((1.0 - eps_ - x) / eps_);
}

double CutoffSet::eta_prime(double x) const
{
    if (x <= 0.5) return smoothstep_prime((x - eps_) / eps_) / eps_;
    return -smoothstep_prime((1.0 - eps_ - x) / eps_) / eps_;
}

double CutoffSet::speed(double x, double v) const
{
    const double b = beta(v);
    return b + (v - b) * eta(x);
}

double CutoffSet::speed_dx(double x, double v) const { return (v - beta(v)) * eta_prime(x); }

double CutoffSet::xi(double zeta)
{
    if (std::fabs(zeta) >= 3.0) return 0.0;
    const double u = 1.0 - zeta * zeta / 9.0;
    return 35.0 / 96.0 * u * u * u;
}

std::vector<std::pair<int, double>> CutoffSet::lattice_weights(double dv) const
{
    const double r = eps_ / dv;
    const int kmax = static_cast<int>(std::ceil(3.0 * r)) - 1;
    if (kmax < 2)
        throw ParameterError("CutoffSet: eps too small for the v grid (need eps > 2 dv / 3)");
    std::vector<std::pair<int, double>> w;
    double sum = 0.0;
    for (int k = -kmax; k <= kmax; ++k) {
        const double x = xi(k / r);
        w.emplace_back(k, x);
        sum += x;
    }
    double m2 = 0.0;
    for (auto& [k, x] : w) {
        x /= sum;
        m2 += (k / r) * (k / r) * x;
    }
    // rescale the off-centre weights so the second moment is exactly one
    const double c = 1.0 / m2;
    double centre = 1.0;
    for (auto& [k, x] : w)
        if (k != 0) {
            x *= c;
            centre -= x;
        }
    if (centre < 0.0) throw ParameterError("CutoffSet: lattice weights lost positivity");
    for (auto& [k, x] : w)
        if (k == 0) x = centre;
    return w;
}

double stable_dt(const PhaseField& f, double cfl, const std::string& scheme, double eps)
{
    if (!(cfl > 0.0 && cfl <= 1.0)) throw ParameterError("stable_dt: cfl must lie in (0, 1]");
    const double vmax = vmax_of(f);
    double xlim = 1e300;
    for (double w : f.wx) xlim = std::min(xlim, w / vmax);
    if (scheme == "upwind") {
        double dlim = 1e300;
        for (int j = 1; j + 1 < f.nv(); ++j) {
            const double hl = f.v[j] - f.v[j - 1], hr = f.v[j + 1] - f.v[j];
            dlim = std::min(dlim, 1.0 / ((2.0 / (hl + hr)) * (1.0 / hl + 1.0 / hr)));
        }
        return cfl * std::min(xlim, dlim);
    }
    if (scheme == "regularized") {
        if (!(eps > 0.0)) throw ParameterError("stable_dt: regularized scheme needs eps > 0");
        return cfl * std::min(xlim, 0.5 * eps * eps);
    }
    if (scheme == "implicit") return std::numeric_limits<double>::infinity();
    throw ParameterError("stable_dt: unknown scheme '" + scheme + "'");
}

StepStats step_upwind(PhaseField& f, double dt)
{
    StepStats st;
    const int nx = f.nx(), nv = f.nv();
    for (int j = 0; j < nv; ++j) {
        const double v = f.v[j];
        if (v > 0.0) {
            st.flux_right += v * f.at(nx - 1, j) * f.wv[j];
            for (int i = nx - 1; i >= 0; --i) {
                const double up = i > 0 ? f.at(i - 1, j) : 0.0;
                f.at(i, j) -= v * dt / f.wx[i] * (f.at(i, j) - up);
            }
        } else if (v < 0.0) {
            st.flux_left -= v * f.at(0, j) * f.wv[j];
            for (int i = 0; i < nx; ++i) {
                const double up = i + 1 < nx ? f.at(i + 1, j) : 0.0;
                f.at(i, j) -= v * dt / f.wx[i] * (up - f.at(i, j));
            }
        }
    }
    st.absorbed_left = dt * st.flux_left;
    st.absorbed_right = dt * st.flux_right;

    const double h0 = f.v[1] - f.v[0], hn = f.v[nv - 1] - f.v[nv - 2];
    std::vector<double> row(nv);
    double leak = 0.0;
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < nv; ++j) row[j] = f.at(i, j);
        leak += f.wx[i] * (row[1] / h0 + row[nv - 2] / hn);
        for (int j = 1; j + 1 < nv; ++j) {
            const double hl = f.v[j] - f.v[j - 1], hr = f.v[j + 1] - f.v[j];
            f.at(i, j) = row[j] + dt * 2.0 / (hl + hr) *
                                      ((row[j + 1] - row[j]) / hr - (row[j] - row[j - 1]) / hl);
        }
        f.at(i, 0) = 0.0;
        f.at(i, nv - 1) = 0.0;
    }
    st.leakage = dt * leak;
    f.t += dt;
    return st;
}

StepStats step_implicit(PhaseField& f, double dt)
{
    // Unsplit backward Euler for v f_x = f_vv with upwind x differences.
    // Splitting is not an option here: next to a strongly graded wall the
    // step is far longer than the local time scale and the split v step
    // smears outgoing values into the incoming half.  The coupled system is
    // solved by symmetric block Gauss-Seidel on whole v columns; every column
    // solve is an M-matrix, so iterates stay within the data bounds.
    StepStats st;
    const int nx = f.nx(), nv = f.nv();
    const std::vector<double> old = f.f;
    std::vector<double> lo(nv), hi(nv), dd(nv), cp(nv), dp(nv), g(nv);
    for (int j = 1; j + 1 < nv; ++j) {
        const double hl = f.v[j] - f.v[j - 1], hr = f.v[j + 1] - f.v[j];
        const double k = 2.0 * dt / (hl + hr);
        lo[j] = -k / hl;
        hi[j] = -k / hr;
        dd[j] = 1.0 + k / hl + k / hr;
    }
    double scale = 0.0;
    for (double v : old) scale = std::max(scale, std::fabs(v));
    if (scale == 0.0) {
        f.t += dt;
        return st;
    }
    auto solve_column = [&](int i) {
        double change = 0.0;
        for (int j = 1; j + 1 < nv; ++j) {
            const double v = f.v[j], c = std::fabs(v) * dt / f.wx[i];
            double up = 0.0;
            if (v > 0.0 && i > 0) up = f.at(i - 1, j);
            if (v < 0.0 && i + 1 < nx) up = f.at(i + 1, j);
            const double diag = dd[j] + c, rhs = old[static_cast<std::size_t>(i) * nv + j] + c * up;
            if (j == 1) {
                cp[j] = hi[j] / diag;
                dp[j] = rhs / diag;
            } else {
                const double m = diag - lo[j] * cp[j - 1];
                cp[j] = hi[j] / m;
                dp[j] = (rhs - lo[j] * dp[j - 1]) / m;
            }
        }
        g[nv - 2] = dp[nv - 2];
        for (int j = nv - 3; j >= 1; --j) g[j] = dp[j] - cp[j] * g[j + 1];
        for (int j = 1; j + 1 < nv; ++j) {
            change = std::max(change, std::fabs(g[j] - f.at(i, j)));
            f.at(i, j) = g[j];
        }
        f.at(i, 0) = 0.0;
        f.at(i, nv - 1) = 0.0;
        return change;
    };
    int it = 0;
    for (;; ++it) {
        double change = 0.0;
        for (int i = 0; i < nx; ++i) change = std::max(change, solve_column(i));
        for (int i = nx - 1; i >= 0; --i) change = std::max(change, solve_column(i));
        if (change <= kImplicitTol * scale) break;
        if (it >= kImplicitMaxSweeps)
            throw NumericalAbort("implicit step: block Gauss-Seidel did not converge (change " +
                                     std::to_string(change / scale) + ")",
                                 f.t, -1, -1);
    }
    st.sweeps = it + 1;

    for (int j = 0; j < nv; ++j) {
        const double v = f.v[j];
        if (v > 0.0) st.absorbed_right += v * dt * f.at(nx - 1, j) * f.wv[j];
        if (v < 0.0) st.absorbed_left -= v * dt * f.at(0, j) * f.wv[j];
    }
    st.flux_left = st.absorbed_left / dt;
    st.flux_right = st.absorbed_right / dt;
    const double h0 = f.v[1] - f.v[0], hn = f.v[nv - 1] - f.v[nv - 2];
    double leak = 0.0;
    for (int i = 0; i < nx; ++i) leak += f.wx[i] * (f.at(i, 1) / h0 + f.at(i, nv - 2) / hn);
    st.leakage = dt * leak;
    f.t += dt;
    return st;
}

namespace {

void apply_jump(const PhaseField& f, const std::vector<std::pair<int, double>>& w, double scale,
                PhaseField& out, bool increment)
{
    const int nx = f.nx(), nv = f.nv();
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < nv; ++j) {
            const double fj = f.at(i, j);
            double s = 0.0;
            for (const auto& [k, wk] : w) {
                const int jj = j + k;
                const double g = (jj >= 0 && jj < nv) ? f.at(i, jj) : 0.0;
                s += wk * (g - fj);
            }
            out.at(i, j) = (increment ? fj : 0.0) + scale * s;
        }
}

}  // namespace

PhaseField jump_q_eps(const PhaseField& f, const CutoffSet& cut)
{
    if (!uniform_nodes(f.v)) throw ParameterError("jump_q_eps: v nodes must be uniform");
    const double dv = f.v[1] - f.v[0];
    const auto w = cut.lattice_weights(dv);
    PhaseField out = f;
    const double e = cut.eps();
    apply_jump(f, w, 2.0 / (e * e), out, false);
    return out;
}

StepStats step_regularized(PhaseField& f, double dt, const CutoffSet& cut)
{
    if (!uniform_nodes(f.v)) throw ParameterError("step_regularized: v nodes must be uniform");
    StepStats st;
    const int nx = f.nx(), nv = f.nv();
    const double m_before = f.mass();

    std::vector<double> xs(nx + 2), vals(nx + 2);
    xs[0] = 0.0;
    xs[nx + 1] = 1.0;
    for (int i = 0; i < nx; ++i) xs[i + 1] = f.x[i];
    for (int j = 0; j < nv; ++j) {
        const double v = f.v[j];
        const double bw = cut.beta(v);  // wall speed: eta vanishes at both walls
        if (bw < 0.0) st.flux_left -= bw * f.at(0, j) * f.wv[j];
        if (bw > 0.0) st.flux_right += bw * f.at(nx - 1, j) * f.wv[j];
        vals[0] = 0.0;
        vals[nx + 1] = 0.0;
        for (int i = 0; i < nx; ++i) vals[i + 1] = f.at(i, j);
        for (int i = 0; i < nx; ++i) {
            const double foot = f.x[i] - cut.speed(f.x[i], v) * dt;
            double val = 0.0;
            if (foot >= 0.0 && foot <= 1.0) {
                auto it = std::upper_bound(xs.begin(), xs.end(), foot);
                int k = std::clamp(static_cast<int>(it - xs.begin()) - 1, 0, nx);
                const double s = (foot - xs[k]) / (xs[k + 1] - xs[k]);
                val = (1.0 - s) * vals[k] + s * vals[k + 1];
            }
            f.at(i, j) = val;
        }
    }
    st.absorbed_left = dt * st.flux_left;
    st.absorbed_right = dt * st.flux_right;
    const double m_mid = f.mass();
    st.defect = (m_mid - m_before) + st.absorbed_left + st.absorbed_right;

    const double dv = f.v[1] - f.v[0];
    const auto w = cut.lattice_weights(dv);
    PhaseField g = f;
    const double e = cut.eps();
    apply_jump(f, w, dt * 2.0 / (e * e), g, true);
    for (int i = 0; i < nx; ++i) {
        g.at(i, 0) = 0.0;
        g.at(i, nv - 1) = 0.0;
    }
    f.f.swap(g.f);
    st.leakage = m_mid - f.mass();
    f.t += dt;
    return st;
}

JacobianReport jacobian_bounds_check(const CutoffSet& cut, double T,
                                     const std::vector<std::pair<double, double>>& samples)
{
    JacobianReport rep;
    const double e = cut.eps();
    double vb = 0.0;
    for (const auto& s : samples) vb = std::max(vb, std::fabs(s.second - cut.beta(s.second)));
    rep.c_const = vb * 1.875 / (e * e);
    rep.bound = e * rep.c_const * T * std::exp(e * rep.c_const * T);

    for (const auto& [x0, v] : samples) {
        auto run = [&](int n, double* max_dev) {
            const double h = T / n;
            double X = x0, J = 1.0;
            auto rhs = [&](double x, double j, double& dx, double& dj) {
                dx = -cut.speed(x, v);
                dj = -cut.speed_dx(x, v) * j;
            };
            for (int k = 0; k < n; ++k) {
                if (X < 0.0 || X > 1.0) break;  // characteristic left through a wall
                double k1x, k1j, k2x, k2j, k3x, k3j, k4x, k4j;
                rhs(X, J, k1x, k1j);
                rhs(X + 0.5 * h * k1x, J + 0.5 * h * k1j, k2x, k2j);
                rhs(X + 0.5 * h * k2x, J + 0.5 * h * k2j, k3x, k3j);
                rhs(X + h * k3x, J + h * k3j, k4x, k4j);
                X += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
                J += h / 6.0 * (k1j + 2 * k2j + 2 * k3j + k4j);
                if (max_dev) *max_dev = std::max(*max_dev, std::fabs(J - 1.0));
            }
            return J;
        };
        const double speed_scale = std::max(std::fabs(v), 1e-12);
        int n = std::max(2000, static_cast<int>(std::ceil(20.0 * T * speed_scale / e)));
        bool ok = false;
        for (int attempt = 0; attempt < 6; ++attempt, n *= 2) {
            const double ja = run(n, nullptr);
            double dev = 0.0;
            const double jb = run(2 * n, &dev);
            if (std::fabs(ja - jb) <= 1e-9 * std::max(1.0, std::fabs(jb))) {
                rep.max_deviation = std::max(rep.max_deviation, dev);
                ok = true;
                break;
            }
        }
        if (!ok)
            throw QuadratureError("jacobian_bounds_check: characteristic ODE tolerance not met", n);
    }
    rep.within_bound = rep.max_deviation <= rep.bound;
    return rep;
}

namespace {

struct Blob {
    double x0, v0, sx, sv, amp;
};

std::vector<Blob> make_blobs(const InitialData& d)
{
    std::mt19937_64 rng(d.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Blob> b;
    for (int k = 0; k < d.blobs; ++k) {
        Blob bl;
        bl.x0 = 0.2 + 0.6 * u(rng);
        bl.v0 = -1.0 + 2.0 * u(rng);
        bl.sx = 0.05 + 0.1 * u(rng);
        bl.sv = 0.2 + 0.4 * u(rng);
        bl.amp = d.amplitude * (0.5 + 0.5 * u(rng));
        b.push_back(bl);
    }
    return b;
}

double blob_value(const std::vector<Blob>& bs, double x, double v)
{
    double s = 0.0;
    for (const auto& b : bs)
        s += b.amp * std::exp(-0.5 * ((x - b.x0) * (x - b.x0) / (b.sx * b.sx) +
                                      (v - b.v0) * (v - b.v0) / (b.sv * b.sv)));
    return s;
}

}  // namespace

double initial_value(const InitialData& d, double x, double v)
{
    if (x < 0.0 || x > 1.0) return 0.0;
    if (d.kind == "zero") return 0.0;
    if (d.kind == "gaussian")
        return d.amplitude * std::exp(-0.5 * ((x - d.x0) * (x - d.x0) / (d.sx * d.sx) +
                                              (v - d.v0) * (v - d.v0) / (d.sv * d.sv)));
    if (d.kind == "ball") {
        const double r = std::hypot(x - d.x0, v - d.v0);
        if (r <= d.radius) return d.amplitude;
        if (d.edge <= 0.0) return 0.0;
        return d.amplitude * (1.0 - smoothstep((r - d.radius) / d.edge));
    }
    if (d.kind == "product")
        return d.amplitude * std::sin(std::numbers::pi * x) *
               std::exp(-0.5 * (v - d.v0) * (v - d.v0) / (d.sv * d.sv));
    if (d.kind == "blobs") return blob_value(make_blobs(d), x, v);
    throw ParameterError("initial_value: unknown kind '" + d.kind + "'");
}

void fill_initial(PhaseField& f, const InitialData& d)
{
    std::vector<Blob> bs;
    if (d.kind == "blobs") bs = make_blobs(d);
    for (int i = 0; i < f.nx(); ++i)
        for (int j = 0; j < f.nv(); ++j)
            f.at(i, j) = d.kind == "blobs" ? blob_value(bs, f.x[i], f.v[j])
                                           : initial_value(d, f.x[i], f.v[j]);
    for (int i = 0; i < f.nx(); ++i) {
        f.at(i, 0) = 0.0;
        f.at(i, f.nv() - 1) = 0.0;
    }
}

namespace {

void wall_flux_rates(const PhaseField& f, const CutoffSet* cut, double& left, double& right)
{
    left = right = 0.0;
    const int nx = f.nx();
    for (int j = 0; j < f.nv(); ++j) {
        const double s = cut ? cut->beta(f.v[j]) : f.v[j];
        if (s < 0.0) left -= s * f.at(0, j) * f.wv[j];
        if (s > 0.0) right += s * f.at(nx - 1, j) * f.wv[j];
    }
}

}  // namespace

Trajectory run_solve(const SolverConfig& cfg, const PhaseField& f0, const RegionFn& region)
{
    if (!(cfg.t_end > f0.t)) throw ParameterError("run_solve: t_end must exceed the start time");
    if (cfg.series_every < 1) throw ParameterError("run_solve: series_every must be >= 1");
    const bool reg = cfg.scheme == "regularized";
    std::unique_ptr<CutoffSet> cut;
    if (reg) cut = std::make_unique<CutoffSet>(cfg.eps);
    PhaseField f = f0;
    Trajectory tr;
    const bool imp = cfg.scheme == "implicit";
    double dt_max = stable_dt(f, cfg.cfl, cfg.scheme, cfg.eps);
    // no stability limit: default to the step a uniform grid of the same size would take
    if (imp) dt_max = cfg.cfl / (cfg.grid.nx * cfg.grid.vmax);
    if (cfg.dt > 0.0) {
        const double limit = stable_dt(f, 1.0, cfg.scheme, cfg.eps);
        if (cfg.dt > limit)
            throw ParameterError("CFL violation: dt = " + std::to_string(cfg.dt) +
                                 " exceeds the stability limit " + std::to_string(limit));
        dt_max = cfg.dt;
    }
    tr.dt = dt_max;
    const double m0 = f.mass();
    const double mref = m0 > 0.0 ? m0 : 1.0;

    std::vector<double> targets;
    for (double s : cfg.snapshot_times)
        if (s > f.t && s < cfg.t_end) targets.push_back(s);
    targets.push_back(cfg.t_end);
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    const bool snap_end = std::find(cfg.snapshot_times.begin(), cfg.snapshot_times.end(),
                                    cfg.t_end) != cfg.snapshot_times.end();
    for (double s : cfg.snapshot_times)
        if (s <= f.t) tr.snapshots.push_back(f);

    auto record = [&]() {
        double fl, fr;
        wall_flux_rates(f, cut.get(), fl, fr);
        tr.t.push_back(f.t);
        tr.mass.push_back(f.mass());
        tr.flux_left.push_back(fl);
        tr.flux_right.push_back(fr);
        tr.leakage.push_back(tr.leaked);
        tr.sup.push_back(f.sup());
        if (region) {
            double m = 0.0;
            for (int i = 0; i < f.nx(); ++i)
                for (int j = 0; j < f.nv(); ++j)
                    if (region(f.x[i], f.v[j])) m = std::max(m, std::fabs(f.at(i, j)));
            tr.region_sup.push_back(m);
        }
    };
    record();

    double m_prev = m0;
    for (double target : targets) {
        const double span = target - f.t;
        const long n = std::max(1L, static_cast<long>(std::ceil(span / dt_max - 1e-9)));
        const double dt = span / n;
        for (long k = 0; k < n; ++k) {
            const StepStats st = reg   ? step_regularized(f, dt, *cut)
                                 : imp ? step_implicit(f, dt)
                                       : step_upwind(f, dt);
            if (k == n - 1) f.t = target;  // remove accumulated rounding in t
            ++tr.steps;
            tr.absorbed_left += st.absorbed_left;
            tr.absorbed_right += st.absorbed_right;
            tr.leaked += st.leakage;
            tr.defect += st.defect;
            const double m = f.mass();
            if (!std::isfinite(m)) check_finite(f, f.t);
            const double book = (m - m_prev) + st.absorbed_left + st.absorbed_right +
                                st.leakage - st.defect;
            tr.bookkeeping_error = std::max(tr.bookkeeping_error, std::fabs(book) / mref);
            m_prev = m;
            if (tr.steps % cfg.series_every == 0 || k == n - 1) record();
        }
        if (target < cfg.t_end || snap_end) tr.snapshots.push_back(f);
    }
    return tr;
}

}  // namespace kfp::solver
