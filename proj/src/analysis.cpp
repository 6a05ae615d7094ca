#include "kfp/analysis.hpp"

#include "kfp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace kfp::analysis {

bool RegionSpec::in_s(double x, double v) const
{
    const double r3 = rho * rho * rho, v3 = std::fabs(v * v * v);
    return std::fabs(x) + v3 <= r3 || std::fabs(x - 1.0) + v3 <= r3;
}

bool RegionSpec::in_half_s(double x, double v) const
{
    const double r = 0.5 * rho, r3 = r * r * r, v3 = std::fabs(v * v * v);
    return std::fabs(x) + v3 <= r3 || std::fabs(x - 1.0) + v3 <= r3;
}

SeriesReport compute_series(const solver::Trajectory& traj, const RegionSpec& region)
{
    SeriesReport s;
    if (traj.snapshots.empty()) return s;
    const auto& first = traj.snapshots.front();
    s.v = first.v;
    for (const auto& f : traj.snapshots) {
        if (f.nv() != first.nv() || f.nx() != first.nx())
            throw ParameterError("compute_series: snapshots on different grids");
        double zs = 0.0, sq = 0.0, mqe = 0.0;
        std::vector<double> H(f.nv(), 0.0), g(f.nv(), 0.0);
        for (int i = 0; i < f.nx(); ++i)
            for (int j = 0; j < f.nv(); ++j) {
                const double val = f.at(i, j);
                if (region.in_s(f.x[i], f.v[j]))
                    zs = std::max(zs, val);
                else
                    sq = std::max(sq, val);
                if (region.in_qe(f.x[i], f.v[j])) mqe += val * f.wx[i] * f.wv[j];
                H[j] += val * f.wx[i];
            }
        for (int j = 0; j < f.nv(); ++j) {
            if (f.v[j] < 0.0) g[j] = -f.v[j] * f.at(0, j);
            if (f.v[j] > 0.0) g[j] = f.v[j] * f.at(f.nx() - 1, j);
        }
        s.t.push_back(f.t);
        s.mass.push_back(f.mass());
        s.zeta_s.push_back(zs);
        s.sup_q.push_back(sq);
        s.sup.push_back(f.sup());
        s.mass_qe.push_back(mqe);
        s.marginal.push_back(std::move(H));
        s.wall_flux.push_back(std::move(g));
    }
    return s;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    LineFit r;
    const int n = static_cast<int>(std::min(x.size(), y.size()));
    r.n = n;
    if (n < 2) throw ParameterError("fit_line: need at least two points");
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw ParameterError("fit_line: abscissae coincide");
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    double sse = 0;
    for (int i = 0; i < n; ++i) {
        const double e = y[i] - r.intercept - r.slope * x[i];
        sse += e * e;
    }
    r.r2 = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
    r.slope_se = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
    return r;
}

DecayFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y, double t_lo,
                         double t_hi)
{
    std::vector<double> xs, ls;
    for (std::size_t i = 0; i < std::min(t.size(), y.size()); ++i) {
        if (t[i] < t_lo || t[i] > t_hi) continue;
        if (!(y[i] > 0.0)) throw ParameterError("fit_exponential: non-positive value in window");
        xs.push_back(t[i]);
        ls.push_back(std::log(y[i]));
    }
    const LineFit lf = fit_line(xs, ls);
    DecayFit d;
    d.kappa = -lf.slope;
    d.stderr_ = lf.slope_se;
    d.r2 = lf.r2;
    d.intercept = lf.intercept;
    d.t_lo = xs.front();
    d.t_hi = xs.back();
    d.points = lf.n;
    return d;
}

DecayFit fit_exponential_auto(const std::vector<double>& t, const std::vector<double>& y, double rel_var)
{
    const std::size_t n = std::min(t.size(), y.size());
    if (n < 8) throw ParameterError("fit_exponential_auto: need at least 8 points");
    const double t_end = t[n - 1];
    auto local_ok = [&](std::size_t s) {
        const double a = t[s], w = (t_end - a) / 4.0;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo, mean = 0.0;
        for (int k = 0; k < 4; ++k) {
            std::vector<double> xs, ls;
            for (std::size_t i = s; i < n; ++i)
                if (t[i] >= a + k * w - 1e-12 && t[i] <= a + (k + 1) * w + 1e-12) {
                    if (!(y[i] > 0.0)) return false;
                    xs.push_back(t[i]);
                    ls.push_back(std::log(y[i]));
                }
            if (xs.size() < 2) return false;
            const double sl = fit_line(xs, ls).slope;
            lo = std::min(lo, sl);
            hi = std::max(hi, sl);
            mean += sl / 4.0;
        }
        return mean < 0.0 && (hi - lo) < rel_var * std::fabs(mean);
    };
    const std::size_t last_start = n - 8;
    const std::size_t stride = std::max<std::size_t>(1, last_start / 64);
    for (std::size_t s = 0; s <= last_start; s += stride)
        if (local_ok(s)) return fit_exponential(t, y, t[s], t_end);
    return fit_exponential(t, y, t[n / 2], t_end);
}

namespace {

HolderFit finish_holder(const std::vector<double>& lx, const std::vector<double>& fx,
                        const std::vector<double>& lv, const std::vector<double>& fv)
{
    if (lx.size() < 3 || lv.size() < 3)
        throw RangeError("holder_fit: fewer than 3 usable levels (x: " + std::to_string(lx.size()) +
                         ", v: " + std::to_string(lv.size()) + ")");
    HolderFit h;
    const auto a = fit_line(lx, fx), b = fit_line(lv, fv);
    h.exponent_x = a.slope;
    h.se_x = a.slope_se;
    h.exponent_v = b.slope;
    h.se_v = b.slope_se;
    h.levels_x = a.n;
    h.levels_v = b.n;
    return h;
}

std::vector<double> v_levels(const HolderOptions& o)
{
    std::vector<double> out;
    for (int k = 0; k < o.v_levels; ++k)
        out.push_back(o.v_lo * std::pow(o.v_hi / o.v_lo, k / (o.v_levels - 1.0)));
    return out;
}

}  // namespace

HolderFit holder_fit(const FieldFn& f, int wall, const HolderOptions& opt)
{
    if (wall != 0 && wall != 1) throw ParameterError("holder_fit: wall must be 0 or 1");
    std::vector<double> lx, fx, lv, fv;
    for (int k = opt.kx_lo; k <= opt.kx_hi; ++k) {
        const double d = std::ldexp(1.0, -k);
        const double val = f(wall == 0 ? d : 1.0 - d, 0.0);
        if (val > 0.0 && std::isfinite(val)) {
            lx.push_back(std::log(d));
            fx.push_back(std::log(val));
        }
    }
    const double xt = wall == 0 ? opt.x_trace : 1.0 - opt.x_trace;
    for (double a : v_levels(opt)) {
        const double val = f(xt, wall == 0 ? -a : a);
        if (val > 0.0 && std::isfinite(val)) {
            lv.push_back(std::log(a));
            fv.push_back(std::log(val));
        }
    }
    return finish_holder(lx, fx, lv, fv);
}

HolderFit holder_fit(const PhaseField& snap, int wall, const HolderOptions& opt)
{
    if (wall != 0 && wall != 1) throw ParameterError("holder_fit: wall must be 0 or 1");
    const int j0 = snap.zero_velocity_index();
    if (j0 < 0) throw ParameterError("holder_fit: grid has no v = 0 node");
    std::vector<double> lx, fx, lv, fv;
    const int nx = snap.nx();
    for (int k = opt.kx_lo; k <= opt.kx_hi; ++k) {
        const double d = std::ldexp(1.0, -k);
        const double x = wall == 0 ? d : 1.0 - d;
        if (x < snap.x.front() || x > snap.x.back()) continue;
        const double val = snap.interpolate(x, 0.0);
        if (val > 0.0) {
            lx.push_back(std::log(d));
            fx.push_back(std::log(val));
        }
    }
    const double xt = wall == 0 ? snap.x[0] : snap.x[nx - 1];
    for (double a : v_levels(opt)) {
        const double val = snap.interpolate(xt, wall == 0 ? -a : a);
        if (val > 0.0) {
            lv.push_back(std::log(a));
            fv.push_back(std::log(val));
        }
    }
    return finish_holder(lx, fx, lv, fv);
}

double decay_lemma_rate(double theta, double beta, double A, double C, int T)
{
    if (!(theta > 0.0 && theta < 1.0)) throw ParameterError("decay_lemma_rate: theta must lie in (0,1)");
    if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("decay_lemma_rate: beta must lie in (0,1)");
    if (!(C > 0.0) || !(A >= C)) throw ParameterError("decay_lemma_rate: need A >= C > 0");
    if (T < 1) throw ParameterError("decay_lemma_rate: T must be a positive integer");
    return std::pow(std::max(beta, theta), 1.0 / (2.0 * (T + 1)));
}

SequenceCheck check_decay_lemma(int families, int n_max, std::uint64_t seed)
{
    SequenceCheck out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int fam = 0; fam < families; ++fam) {
        const double theta = 0.05 + 0.9 * U(rng), beta = 0.05 + 0.9 * U(rng);
        const double C = 0.1 + 4.9 * U(rng), A = C * (1.0 + 2.0 * U(rng));
        const int T = 1 + static_cast<int>(4 * U(rng));
        // probability of taking the largest value each hypothesis allows
        const double p_sat = 0.5 + 0.5 * U(rng);
        auto slack = [&]() { return U(rng) < p_sat ? 1.0 : 0.5 + 0.5 * U(rng); };

        const int len = n_max + T + 2;
        std::vector<double> M(len), z(len), cap(len, std::numeric_limits<double>::infinity());
        M[0] = 0.5 + 1.5 * U(rng);
        z[0] = 5.0 * A * M[0] * U(rng);
        z[1] = theta * std::max(z[0], C * M[0]) * slack();
        for (int n = 1; n <= n_max; ++n) {
            M[n] = std::min(M[n - 1], cap[n]) * slack();
            if (z[n] < A * M[n - 1]) cap[n + T] = std::min(cap[n + T], beta * M[n - 1]);
            z[n + 1] = theta * std::max(z[n], C * M[n - 1]) * slack();
        }
        const double mu = decay_lemma_rate(theta, beta, A, C, T);
        const double gam = std::max(beta, theta);
        const double c = (A + 1.0) * std::max({z[0] / A, z[1] / A, M[0]}) / gam;
        bool bad = false;
        for (int n = 0; n <= n_max; ++n) {
            const double r = (z[n] + M[n]) / (c * std::pow(mu, n));
            out.worst_ratio = std::max(out.worst_ratio, r);
            if (r > 1.0 + 1e-12) bad = true;
        }
        ++out.families;
        if (bad) ++out.violations;
    }
    return out;
}

TightnessResult tightness_check(const PhaseField& snap, double delta)
{
    if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("tightness_check: delta must lie in (0,1)");
    TightnessResult r;
    r.mass = snap.mass();
    if (!(r.mass > 0.0)) return r;
    std::vector<double> col(snap.nv(), 0.0);
    for (int i = 0; i < snap.nx(); ++i)
        for (int j = 0; j < snap.nv(); ++j) col[j] += snap.at(i, j) * snap.wx[i] * snap.wv[j];
    std::vector<int> order(snap.nv());
    for (int j = 0; j < snap.nv(); ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::fabs(snap.v[a]) < std::fabs(snap.v[b]); });
    double acc = 0.0, vmax = 0.0;
    for (double v : snap.v) vmax = std::max(vmax, std::fabs(v));
    for (std::size_t k = 0; k < order.size(); ++k) {
        acc += col[order[k]];
        const double B = std::fabs(snap.v[order[k]]);
        const bool tie = k + 1 < order.size() && std::fabs(snap.v[order[k + 1]]) == B;
        if (!tie && acc >= (1.0 - delta) * r.mass * (1.0 - 1e-12)) {
            r.B = B;
            break;
        }
        r.B = B;
    }
    // the outermost interior node is the last one carrying mass
    double last = 0.0;
    for (double v : snap.v)
        if (std::fabs(v) < vmax) last = std::max(last, std::fabs(v));
    r.hit_truncation = r.B >= last;
    return r;
}

TightnessSeries tightness_series(const solver::Trajectory& traj, double delta)
{
    TightnessSeries s;
    s.verified = true;
    for (const auto& snap : traj.snapshots) {
        const auto r = tightness_check(snap, delta);
        if (!(r.mass > 0.0)) continue;
        s.t.push_back(snap.t);
        s.B.push_back(r.B);
        s.c_fit = std::max(s.c_fit, r.B / (1.0 + std::log(1.0 / (delta * r.mass)) + snap.t));
        if (r.hit_truncation) s.verified = false;
    }
    if (s.t.size() >= 2) s.growth = fit_line(s.t, s.B);
    return s;
}

DerivativeScaling derivative_scaling_check(const PhaseField& snap, int wall, double d_max, double v_max)
{
    if (wall != 0 && wall != 1) throw ParameterError("derivative_scaling_check: wall must be 0 or 1");
    if (snap.nx() < 3 || snap.nv() < 3) throw ParameterError("derivative_scaling_check: grid too small");
    DerivativeScaling out;
    for (int i = 1; i + 1 < snap.nx(); ++i) {
        const double x = snap.x[i];
        const double d = wall == 0 ? x : 1.0 - x;
        if (d > d_max) continue;
        for (int j = 1; j + 1 < snap.nv(); ++j) {
            const double v = snap.v[j];
            if (std::fabs(v) > v_max) continue;
            const double hl = v - snap.v[j - 1], hr = snap.v[j + 1] - v;
            const double fx = (snap.at(i + 1, j) - snap.at(i - 1, j)) / (snap.x[i + 1] - snap.x[i - 1]);
            const double fv = (snap.at(i, j + 1) - snap.at(i, j - 1)) / (hl + hr);
            const double fvv = 2.0 * ((snap.at(i, j + 1) - snap.at(i, j)) / hr -
                                      (snap.at(i, j) - snap.at(i, j - 1)) / hl) / (hl + hr);
            const double w = std::fabs(v * v * v) + d;
            out.fx = std::max(out.fx, w * std::fabs(fx));
            out.fv = std::max(out.fv, std::cbrt(w) * std::fabs(fv));
            out.fvv = std::max(out.fvv, std::cbrt(w * w) * std::fabs(fvv));
        }
    }
    return out;
}

CascadeReport cascade_check(const SeriesReport& s, double lag)
{
    CascadeReport r;
    auto find = [&](double t) -> int {
        for (std::size_t k = 0; k < s.t.size(); ++k)
            if (std::fabs(s.t[k] - t) < 1e-9) return static_cast<int>(k);
        return -1;
    };
    for (std::size_t k = 0; k < s.t.size(); ++k) {
        const int p = find(s.t[k] - lag);
        if (p >= 0 && s.mass_qe[p] > 0.0) r.c_s = std::max(r.c_s, s.sup_q[k] / s.mass_qe[p]);
    }
    for (std::size_t k = 0; k < s.t.size(); ++k) {
        const int p = find(s.t[k] - lag), q = find(s.t[k] + lag);
        if (p < 0 || q < 0 || !(s.zeta_s[k] > 0.0)) continue;
        if (s.zeta_s[k] > r.c_s * s.mass[p]) {
            r.theta = std::max(r.theta, s.zeta_s[q] / s.zeta_s[k]);
            ++r.cascade_steps;
        }
    }
    return r;
}

}  // namespace kfp::analysis
