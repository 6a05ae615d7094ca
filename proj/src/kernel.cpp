#include "kfp/kernel.hpp"

#include "kfp/errors.hpp"
#include "kfp/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace kfp::kernel {

namespace {

constexpr double kPi = std::numbers::pi;
const double kSqrt3 = std::sqrt(3.0);

}  // namespace

double eval_g(double x, double v, double nu, double tau)
{
    if (!(tau > 0.0)) throw ParameterError("eval_g: tau must be positive");
    const double d = x - 0.5 * tau * (v + nu);
    const double e = 3.0 * d * d / (tau * tau * tau) + (v - nu) * (v - nu) / (4.0 * tau);
    return kSqrt3 / (2.0 * kPi * tau * tau) * std::exp(-e);
}

PhaseField free_propagate(const PhaseField& f0, double t)
{
    if (!(t > 0.0)) throw ParameterError("free_propagate: t must be positive");
    double hx = 0.0, hv = 0.0;
    for (int i = 0; i + 1 < f0.nx(); ++i) hx = std::max(hx, f0.x[i + 1] - f0.x[i]);
    for (int j = 0; j + 1 < f0.nv(); ++j) hv = std::max(hv, f0.v[j + 1] - f0.v[j]);
    // conditional widths of G in the source variables
    const double sx = std::sqrt(t * t * t / 6.0), sv = std::sqrt(t / 2.0);
    if (hx > sx || hv > sv)
        throw QuadratureError("free_propagate: grid spacing (" + std::to_string(hx) + ", " +
                                  std::to_string(hv) + ") does not resolve G at t=" +
                                  std::to_string(t),
                              0);
    PhaseField out = f0;
    out.t = f0.t + t;
    std::fill(out.f.begin(), out.f.end(), 0.0);
    for (int k = 0; k < f0.nx(); ++k) {
        for (int l = 0; l < f0.nv(); ++l) {
            const double src = f0.at(k, l) * f0.wx[k] * f0.wv[l];
            if (src == 0.0) continue;
            for (int i = 0; i < out.nx(); ++i) {
                const double dx = out.x[i] - f0.x[k];
                for (int j = 0; j < out.nv(); ++j)
                    out.at(i, j) += src * eval_g(dx, out.v[j], f0.v[l], t);
            }
        }
    }
    return out;
}

double layer_integrand(const DensityFn& lambda, double x, double v, double t, double sigma)
{
    if (!(sigma > 0.0)) return 0.0;
    const double m = x / sigma - v;
    const double expo = 0.75 * (x - sigma * v) * (x - sigma * v) / (sigma * sigma * sigma);
    if (expo > 700.0) return 0.0;
    // G is Gaussian in w with centre v + 1.5 m and variance sigma / 2
    const double centre = v + 1.5 * m;
    const double rs = std::sqrt(sigma);
    const double s = t - sigma;
    auto inner = [&](double u) { return lambda(centre + rs * u, s) * std::exp(-u * u); };
    // adaptive: a fixed rule leaves sigma-dependent noise that stalls the outer integral
    const double j = quad::adaptive_est(inner, -9.0, 9.0, 1e-11, nullptr, 12);
    return kSqrt3 / (2.0 * kPi) * std::pow(sigma, -1.5) * std::exp(-expo) * j;
}

namespace {

double layer_integral(const DensityFn& lambda, double x, double v, double t)
{
    std::vector<double> br{0.0, t};
    if (x > 0.0) {
        const double peak = x / v;
        const double width = std::sqrt(4.0 * peak * peak * peak / (3.0 * v * v));
        for (double k : {-30.0, -10.0, -4.0, -1.0, 0.0, 1.0, 4.0, 10.0, 30.0, 100.0, 1000.0}) {
            const double p = peak + k * width;
            if (p > 0.0 && p < t) br.push_back(p);
        }
        for (double p = 10.0 * peak; p < t; p *= 10.0) br.push_back(p);
    } else {
        for (double p = 1e-3; p < t; p *= 10.0) br.push_back(p);
    }
    std::sort(br.begin(), br.end());
    auto g = [&](double sigma) { return layer_integrand(lambda, x, v, t, sigma); };
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < br.size(); ++i) {
        if (!(br[i + 1] > br[i])) continue;
        try {
            total += quad::adaptive(g, br[i], br[i + 1], 1e-8, 20, 1e-14);
        } catch (const QuadratureError& e) {
            throw QuadratureError("limit_identity_check: layer s -> t not resolved on [" +
                                      std::to_string(t - br[i + 1]) + ", " +
                                      std::to_string(t - br[i]) + "] at x=" + std::to_string(x),
                                  e.level());
        }
    }
    return total;
}

}  // namespace

LimitCheck limit_identity_check(const DensityFn& lambda, double v, double t,
                                const std::vector<double>& xs)
{
    if (!(v > 0.0)) throw ParameterError("limit_identity_check: v must be positive");
    if (!(t > 0.0)) throw ParameterError("limit_identity_check: t must be positive");
    LimitCheck out;
    const double rhs = lambda(v, t) / v + layer_integral(lambda, 0.0, v, t);
    for (double x : xs) {
        if (!(x > 0.0)) throw ParameterError("limit_identity_check: x must be positive");
        const double lhs = layer_integral(lambda, x, v, t);
        out.rows.push_back({x, lhs, rhs, std::fabs(lhs - rhs)});
    }
    out.monotone = true;
    for (std::size_t i = 1; i < out.rows.size(); ++i)
        if (out.rows[i].abs_err > out.rows[i - 1].abs_err + 1e-14) out.monotone = false;
    return out;
}

double kernel_k(double v, double w, double tau)
{
    if (!(tau > 0.0)) return 0.0;
    return v * eval_g(0.0, -v, -w, tau);
}

BoundaryDensity solve_boundary_density(const DensityFn& q, const BoundaryWindow& win,
                                       double tol, int max_iter)
{
    if (win.n_v < 3 || win.n_t < 3 || !(win.delta > 0.0) || !(win.t0 > 0.0))
        throw ParameterError("solve_boundary_density: bad window");
    if (win.v0 + 2.0 * win.delta >= 0.0)
        throw ParameterError("solve_boundary_density: window must stay in v < 0");
    BoundaryDensity out;
    const int nv = win.n_v, nt = win.n_t;
    out.v.resize(nv);
    out.t.resize(nt);
    for (int i = 0; i < nv; ++i)
        out.v[i] = win.v0 - 2.0 * win.delta + 4.0 * win.delta * i / (nv - 1);
    const double dt = win.t0 / (nt - 1);
    for (int k = 0; k < nt; ++k) out.t[k] = dt * k;
    const auto wv = quad::trapezoid_weights(out.v);

    // kern[(d * nv + i) * nv + l] = -K(v_i, w_l, d dt) * weight_l
    std::vector<double> kern(static_cast<std::size_t>(nt) * nv * nv, 0.0);
    for (int d = 1; d < nt; ++d)
        for (int i = 0; i < nv; ++i)
            for (int l = 0; l < nv; ++l)
                kern[(static_cast<std::size_t>(d) * nv + i) * nv + l] =
                    -kernel_k(out.v[i], out.v[l], d * dt) * wv[l];

    std::vector<double> qv(static_cast<std::size_t>(nv) * nt);
    for (int i = 0; i < nv; ++i)
        for (int k = 0; k < nt; ++k) qv[i * nt + k] = q(out.v[i], out.t[k]);

    auto apply = [&](const std::vector<double>& lam) {
        std::vector<double> r(lam.size(), 0.0);
        for (int i = 0; i < nv; ++i)
            for (int j = 0; j < nt; ++j) {
                double s = 0.0;
                for (int k = j + 1; k < nt; ++k) {
                    const double ws = (k == nt - 1) ? 0.5 * dt : dt;
                    const double* row = &kern[(static_cast<std::size_t>(k - j) * nv + i) * nv];
                    double inner = 0.0;
                    for (int l = 0; l < nv; ++l) inner += row[l] * lam[l * nt + k];
                    s += ws * inner;
                }
                r[i * nt + j] = s;
            }
        return r;
    };

    std::vector<double> lam = qv;
    int bad = 0;
    for (int it = 1; it <= max_iter; ++it) {
        auto kl = apply(lam);
        double diff = 0.0;
        for (std::size_t n = 0; n < lam.size(); ++n) {
            const double nw = qv[n] + kl[n];
            diff = std::max(diff, std::fabs(nw - lam[n]));
            lam[n] = nw;
        }
        out.iterations = it;
        if (!out.increments.empty() && out.increments.back() > 0.0) {
            const double ratio = diff / out.increments.back();
            out.ratios.push_back(ratio);
            bad = ratio >= 1.0 ? bad + 1 : 0;
            if (bad >= 3)
                throw ConvergenceError("solve_boundary_density: Picard iteration not contracting",
                                       ratio);
        }
        out.increments.push_back(diff);
        if (diff < tol) {
            out.converged = true;
            break;
        }
    }
    const auto kl = apply(lam);
    for (std::size_t n = 0; n < lam.size(); ++n)
        out.residual = std::max(out.residual, std::fabs(lam[n] - qv[n] - kl[n]));
    out.lambda = std::move(lam);
    const auto fit = fit_kernel_bound(win);
    out.fitted_a = fit.a;
    out.fitted_c = fit.c;
    return out;
}

KernelBoundFit fit_kernel_bound(const BoundaryWindow& win)
{
    const int ns = 41;
    std::vector<double> vs(ns);
    for (int i = 0; i < ns; ++i) vs[i] = win.v0 - 2.0 * win.delta + 4.0 * win.delta * i / (ns - 1);
    std::vector<double> taus, peaks;
    const int ntau = 200;
    for (int k = 0; k < ntau; ++k) {
        const double tau = win.t0 * std::pow(1e-3, 1.0 - static_cast<double>(k) / (ntau - 1));
        double m = 0.0;
        for (double v : vs)
            for (double w : vs) m = std::max(m, std::fabs(kernel_k(v, w, tau)));
        taus.push_back(tau);
        peaks.push_back(m);
    }
    // least squares of log m against 1/tau over the small-tau samples
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (int k = 0; k < ntau; ++k) {
        if (taus[k] > 0.25 * win.t0 || !(peaks[k] > 1e-300)) continue;
        const double xk = 1.0 / taus[k], yk = std::log(peaks[k]);
        sx += xk;
        sy += yk;
        sxx += xk * xk;
        sxy += xk * yk;
        ++n;
    }
    KernelBoundFit fit;
    if (n < 3) return fit;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.a = -slope;
    for (int k = 0; k < ntau; ++k)
        if (peaks[k] > 0.0)
            fit.c = std::max(fit.c, std::exp(std::log(peaks[k]) + fit.a / taus[k]));
    fit.holds = fit.a > 0.0;
    for (int k = 0; k < ntau; ++k)
        if (peaks[k] > fit.c * std::exp(-fit.a / taus[k]) * (1.0 + 1e-12)) fit.holds = false;
    return fit;
}

std::vector<PhaseField> backward_transform(const std::vector<PhaseField>& snaps, double T)
{
    std::vector<PhaseField> out;
    out.reserve(snaps.size());
    for (auto it = snaps.rbegin(); it != snaps.rend(); ++it) {
        const PhaseField& f = *it;
        const int nv = f.nv();
        for (int j = 0; j < nv; ++j)
            if (std::fabs(f.v[j] + f.v[nv - 1 - j]) > 1e-12 * (1.0 + std::fabs(f.v[j])))
                throw ParameterError("backward_transform: v nodes are not symmetric");
        PhaseField g = f;
        g.t = T - f.t;
        for (int i = 0; i < f.nx(); ++i)
            for (int j = 0; j < nv; ++j) g.at(i, j) = f.at(i, nv - 1 - j);
        out.push_back(std::move(g));
    }
    return out;
}

BackwardResidual backward_residual(const std::vector<PhaseField>& g, int margin)
{
    BackwardResidual r;
    for (std::size_t k = 1; k + 1 < g.size(); ++k) {
        const PhaseField& a = g[k - 1];
        const PhaseField& b = g[k];
        const PhaseField& c = g[k + 1];
        const double dt = c.t - a.t;
        for (int i = margin; i < b.nx() - margin; ++i) {
            const double hl = b.x[i] - b.x[i - 1], hr = b.x[i + 1] - b.x[i];
            for (int j = margin; j < b.nv() - margin; ++j) {
                const double kl = b.v[j] - b.v[j - 1], kr = b.v[j + 1] - b.v[j];
                const double gt = (c.at(i, j) - a.at(i, j)) / dt;
                const double gx = (b.at(i + 1, j) - b.at(i - 1, j)) / (hl + hr);
                const double gvv = 2.0 * (kl * b.at(i, j + 1) - (kl + kr) * b.at(i, j) +
                                          kr * b.at(i, j - 1)) /
                                   (kl * kr * (kl + kr));
                const double res = -gt - b.v[j] * gx - gvv;
                r.max_abs = std::max(r.max_abs, std::fabs(res));
                r.scale = std::max(r.scale, std::fabs(gt) + std::fabs(b.v[j] * gx) + std::fabs(gvv));
            }
        }
    }
    return r;
}

double g_mass(double nu, double tau)
{
    if (!(tau > 0.0)) throw ParameterError("g_mass: tau must be positive");
    const double sv = std::sqrt(2.0 * tau);
    // given v, G is Gaussian in x with centre tau (v + nu) / 2 and variance tau^3 / 6
    const double sx = std::sqrt(tau * tau * tau / 6.0);
    auto inner = [&](double v) {
        const double c = 0.5 * tau * (v + nu);
        return quad::adaptive([&](double x) { return eval_g(x, v, nu, tau); }, c - 12.0 * sx,
                              c + 12.0 * sx, 1e-12, 18, 1e-16);
    };
    return quad::adaptive(inner, nu - 12.0 * sv, nu + 12.0 * sv, 1e-12, 18, 1e-16);
}

std::vector<double> g_pde_residuals(double h, int levels)
{
    struct P {
        double x, v, nu, tau;
    };
    const P pts[] = {{0.1, 0.3, 0.0, 0.5}, {-0.2, -0.5, 0.4, 1.0}, {0.05, 1.0, 0.8, 0.3},
                     {0.3, 0.0, -0.2, 0.8}, {0.0, 0.2, 0.2, 0.1}};
    std::vector<double> out;
    for (int l = 0; l < levels; ++l) {
        const double s = h / std::ldexp(1.0, l);
        double worst = 0.0;
        for (const auto& p : pts) {
            auto G = [&](double x, double v, double tau) { return eval_g(x, v, p.nu, tau); };
            const double gt = (G(p.x, p.v, p.tau + s) - G(p.x, p.v, p.tau - s)) / (2 * s);
            const double gx = (G(p.x + s, p.v, p.tau) - G(p.x - s, p.v, p.tau)) / (2 * s);
            const double gvv =
                (G(p.x, p.v + s, p.tau) - 2 * G(p.x, p.v, p.tau) + G(p.x, p.v - s, p.tau)) / (s * s);
            worst = std::max(worst, std::fabs(gt + p.v * gx - gvv));
        }
        out.push_back(worst);
    }
    return out;
}

ChapmanKolmogorov chapman_kolmogorov(double t, double s, double nu)
{
    if (!(t > 0.0 && s > 0.0)) throw ParameterError("chapman_kolmogorov: times must be positive");
    ChapmanKolmogorov r;
    const double T = t + s;
    const double cx = T * nu;  // mean position after T
    const double pts[][2] = {{cx, nu}, {cx + 0.3, nu + 0.5}, {cx - 0.4, nu - 1.0}, {cx + 0.8, nu + 1.2}};
    const double sw = std::sqrt(2.0 * t);
    const double sxi = std::sqrt(t * t * t / 6.0);
    for (const auto& p : pts) {
        const double x = p[0], v = p[1];
        // intermediate velocity w, then position xi given w
        auto over_w = [&](double w) {
            const double c = 0.5 * t * (w + nu);
            return quad::composite_gauss(
                [&](double xi) { return eval_g(x - xi, v, w, s) * eval_g(xi, w, nu, t); },
                c - 10.0 * sxi, c + 10.0 * sxi, 24);
        };
        const double comp = quad::composite_gauss(over_w, nu - 10.0 * sw, nu + 10.0 * sw, 48);
        const double direct = eval_g(x, v, nu, T);
        r.max_abs_err = std::max(r.max_abs_err, std::fabs(comp - direct));
        r.peak = std::max(r.peak, direct);
    }
    return r;
}

}  // namespace kfp::kernel
