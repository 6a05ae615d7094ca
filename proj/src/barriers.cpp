#include "kfp/barriers.hpp"

#include "kfp/errors.hpp"
#include "kfp/quadrature.hpp"
#include "kfp/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace kfp::barriers {

namespace sf = kfp::specfun;

double steady_regular_f0(const SelfSimilarProfile& p, double x, double v)
{
    if (!(x > 0.0)) throw ParameterError("steady_regular_f0: x must be positive");
    return std::pow(x, p.alpha()) * p.lambda(v / std::cbrt(9.0 * x));
}

double steady_singular(double alpha, int wall, double x, double v)
{
    sf::AlphaParam::singular(alpha);
    if (wall != 0 && wall != 1) throw ParameterError("steady_singular: wall must be 0 or 1");
    if (!(x > 0.0 && x < 1.0)) throw ParameterError("steady_singular: x must lie strictly inside (0,1)");
    const double d = wall == 0 ? x : 1.0 - x;
    const double w = wall == 0 ? v : -v;
    try {
        const double m = sf::kummer_m(-alpha, 2.0 / 3.0, -w * w * w / (9.0 * d));
        const double r = std::pow(d, alpha) * m;
        return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
    } catch (const RangeError&) {
        return std::numeric_limits<double>::infinity();
    }
}

// ---------------------------------------------------------------------------
// phi solves z phi'' + (2/3 - z) phi' - a2 phi = -gamma Q(z) / z^{1/3} with
// a2 = -(2/3 + alpha), Q(z) = Lambda(-cbrt z).  Everything is done in
// u = cbrt(z), where d eta / eta^{2/3} = 3 du removes the singularity at 0.
//
// For u >= -1:  phi = -M2 A - U2 B with
//   A = kappa int_u^inf Q U2 e^{-w^3} dw,  B = kappa int_0^u Q M2 e^{-w^3} dw,
//   kappa = -3 gamma Gamma(a2) / Gamma(2/3);
// A is carried as e^{u^3} A so M2 A never forms e^z.
// For u < -1 the pair y1 = M2, y2 = e^z U(2/3 - a2, 2/3, -z) is used, both
// well scaled there, and the solution is continued by matching phi, phi'.

namespace {

constexpr double kB = 2.0 / 3.0;

// Composite Gauss over [a, b] with panels sized to the decay scale of
// exp(+-(a^3 - w^3)), about 1/(3 w^2).
template <class F>
double weighted_cell(F&& f, double a, double b)
{
    const double w = std::max(std::fabs(a), std::fabs(b));
    const int panels = std::max(1, static_cast<int>(std::ceil(3.0 * w * w * (b - a) / 0.5)));
    return quad::composite_gauss(f, a, b, panels);
}

}  // namespace

SuperSolutionZ0::SuperSolutionZ0(const SelfSimilarProfile& profile, const Z0Options& opt)
    : profile_(&profile), alpha_(profile.alpha())
{
    gamma_ = opt.gamma > 0.0 ? opt.gamma : 3.0 * alpha_;
    if (!(gamma_ > 1.5 * alpha_)) throw ParameterError("build_z0: gamma must exceed 3 alpha / 2");
    if (!(opt.u_step > 0.0) || !(opt.u_max > 2.0)) throw ParameterError("build_z0: bad table extent");

    const double a2 = -(kB + alpha_);
    const double kappa = -3.0 * gamma_ * sf::gamma_fn(a2) / sf::gamma_fn(kB);
    const int n = static_cast<int>(std::lround(2.0 * opt.u_max / opt.u_step));
    const double h = 2.0 * opt.u_max / n;
    std::vector<double> u(n + 1);
    for (int i = 0; i <= n; ++i) u[i] = -opt.u_max + i * h;
    const int i0 = static_cast<int>(std::lround(opt.u_max / h));        // u = 0
    const int im = static_cast<int>(std::lround((opt.u_max - 1.0) / h)); // u ~ -1
    u[i0] = 0.0;

    auto Q = [&](double w) { return profile.lambda(-w); };
    auto U2 = [&](double w) { return sf::tricomi_u(a2, kB, w * w * w); };
    auto M2s = [&](double w) { return sf::kummer_m_scaled(a2, kB, w * w * w); };

    std::vector<double> phi(n + 1, 0.0), phiz(n + 1, 0.0);

    // e^{u^3} A on [u_m, u_max], downward.
    std::vector<double> At(n + 1, 0.0);
    {
        const double top = u[n];
        const double span = 40.0 / (3.0 * top * top);
        At[n] = kappa * quad::composite_gauss(
                            [&](double w) { return Q(w) * U2(w) * std::exp(top * top * top - w * w * w); },
                            top, top + span, 16);
        for (int i = n - 1; i >= im; --i) {
            const double a = u[i], b = u[i + 1];
            const double a3 = a * a * a;
            const double cell = weighted_cell(
                [&](double w) { return Q(w) * U2(w) * std::exp(a3 - w * w * w); }, a, b);
            At[i] = std::exp(a3 - b * b * b) * At[i + 1] + kappa * cell;
        }
    }
    // B, outward from u = 0.
    std::vector<double> B(n + 1, 0.0);
    for (int i = i0 + 1; i <= n; ++i)
        B[i] = B[i - 1] + kappa * quad::gauss10([&](double w) { return Q(w) * M2s(w); }, u[i - 1], u[i]);
    for (int i = i0 - 1; i >= im; --i)
        B[i] = B[i + 1] - kappa * quad::gauss10([&](double w) { return Q(w) * M2s(w); }, u[i], u[i + 1]);

    for (int i = im; i <= n; ++i) {
        const double z = u[i] * u[i] * u[i];
        const double m2s = sf::kummer_m_scaled(a2, kB, z);
        const double m2ds = (a2 / kB) * sf::kummer_m_scaled(a2 + 1.0, kB + 1.0, z);
        if (i == i0) {  // B = 0 here and dphi/du vanishes
            phi[i] = -m2s * At[i];
            continue;
        }
        phi[i] = -m2s * At[i] - sf::tricomi_u(a2, kB, z) * B[i];
        phiz[i] = -m2ds * At[i] - sf::tricomi_u_deriv(a2, kB, z) * B[i];
    }

    // Continuation to u < u_m.
    {
        const double ap = kB - a2;  // 4/3 + alpha
        auto Ut = [&](double w) { return sf::tricomi_u(ap, kB, -w * w * w); };
        const double um = u[im], zm = um * um * um;
        const double y1 = sf::kummer_m(a2, kB, zm), y1d = sf::kummer_m_deriv(a2, kB, zm);
        const double ut = sf::tricomi_u(ap, kB, -zm), utd = sf::tricomi_u_deriv(ap, kB, -zm);
        // y2 = e^z ut, y2' = e^z (ut - utd); Wronskian = c cbrt(z)^{-2} e^z.
        const double wsc = y1 * (ut - utd) - y1d * ut;
        const double c = wsc * std::cbrt(zm) * std::cbrt(zm);
        const double c1 = (phi[im] * (ut - utd) - phiz[im] * ut) / wsc;
        const double c2s = (y1 * phiz[im] - y1d * phi[im]) / wsc;  // c2 e^{z_m}
        double I1 = 0.0, I2t = 0.0;
        for (int i = im - 1; i >= 0; --i) {
            const double a = u[i], b = u[i + 1];
            const double a3 = a * a * a, b3 = b * b * b;
            I1 += (3.0 * gamma_ / c) * quad::gauss10([&](double w) { return Q(w) * Ut(w); }, a, b);
            const double cell = weighted_cell(
                [&](double w) { return sf::kummer_m(a2, kB, w * w * w) * Q(w) * std::exp(a3 - w * w * w); },
                a, b);
            I2t = std::exp(a3 - b3) * I2t + (3.0 * gamma_ / c) * cell;
            const double z = a3;
            const double y1z = sf::kummer_m(a2, kB, z), y1dz = sf::kummer_m_deriv(a2, kB, z);
            const double utz = sf::tricomi_u(ap, kB, -z), utdz = sf::tricomi_u_deriv(ap, kB, -z);
            const double decay = std::exp(z - zm);
            phi[i] = -y1z * I1 + utz * I2t + c1 * y1z + c2s * decay * utz;
            phiz[i] = -y1dz * I1 + (utz - utdz) * I2t + c1 * y1dz + c2s * decay * (utz - utdz);
        }
    }

    std::vector<double> phiu(n + 1);
    for (int i = 0; i <= n; ++i) phiu[i] = 3.0 * u[i] * u[i] * phiz[i];
    const double p = 2.0 + 3.0 * alpha_;
    tail_lo_ = phi[0] / std::pow(opt.u_max, p);
    tail_hi_ = phi[n] / std::pow(opt.u_max, p);
    phi_u_ = HermiteTable(-opt.u_max, opt.u_max, std::move(phi), std::move(phiu));
    for (double v : phi_u_.values())
        if (!std::isfinite(v)) throw NumericalAbort("build_z0: non-finite phi table", 0.0, -1, -1);

    // Largest dyadic radius passing both checks.
    for (int k = 1; k <= 12; ++k) {
        const double r = std::ldexp(1.0, -k);
        const auto chk = check_region(r, opt.samples);
        if (chk.worst_ratio <= opt.domination && chk.worst_margin <= 0.0) {
            r_max_ = r;
            worst_ratio_ = chk.worst_ratio;
            worst_margin_ = chk.worst_margin;
            worst_ = chk.worst_margin_at;
            break;
        }
        if (k == 12)
            throw NumericalAbort("build_z0: no validated region; worst ratio " +
                                     std::to_string(chk.worst_ratio) + " at y=" +
                                     std::to_string(chk.worst_ratio_at.y) + ", xi=" +
                                     std::to_string(chk.worst_ratio_at.xi),
                                 0.0, -1, -1);
    }
    // Smallest power of two lifting K Z0 to 1 on the region boundary.
    const double r3 = r_max_ * r_max_ * r_max_;
    double zmin = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= 256; ++j) {
        const double y = r3 * j / 256.0;
        const double xi = std::cbrt(r3 - y);
        const double yy = std::max(y, 1e-300);
        zmin = std::min({zmin, z0(yy, xi), z0(yy, -xi)});
    }
    k_cap_ = std::max(2.0, std::exp2(std::ceil(std::log2(1.0 / zmin))));
}

double SuperSolutionZ0::phi(double z, bool* extrapolated) const
{
    const double u = std::cbrt(z);
    if (phi_u_.contains(u)) {
        if (extrapolated) *extrapolated = false;
        return phi_u_.value(u);
    }
    if (extrapolated) *extrapolated = true;
    const double p = 2.0 + 3.0 * alpha_;
    return (u > 0 ? tail_hi_ : tail_lo_) * std::pow(std::fabs(u), p);
}

double SuperSolutionZ0::phi_z(double z) const
{
    const double u = std::cbrt(z);
    if (std::fabs(u) < 1e-3) return 0.5 * (phi_z(1e-9) + phi_z(-1e-9));
    if (phi_u_.contains(u)) return phi_u_.deriv(u) / (3.0 * u * u);
    const double p = 2.0 + 3.0 * alpha_;
    const double c = u > 0 ? tail_hi_ : tail_lo_;
    return c * p * std::pow(std::fabs(u), p - 1.0) * (u > 0 ? 1.0 : -1.0) / (3.0 * u * u);
}

double SuperSolutionZ0::ode_residual_at_node(int i) const
{
    const auto& val = phi_u_.values();
    const auto& du = phi_u_.derivs();
    const int n = static_cast<int>(val.size());
    if (i < 1 || i >= n - 1) throw ParameterError("ode_residual_at_node: interior nodes only");
    const double h = phi_u_.step();
    const double u = phi_u_.lo() + i * h;
    if (std::fabs(u) < 0.5 * h) throw ParameterError("ode_residual_at_node: z = 0 is singular");
    // phi_z = phi_u / (3u^2); differentiate phi_z in u, then divide by dz/du.
    auto pz = [&](int k) {
        const double uk = phi_u_.lo() + k * h;
        return du[k] / (3.0 * uk * uk);
    };
    const double z = u * u * u;
    const double pzz = (pz(i + 1) - pz(i - 1)) / (2.0 * h) / (3.0 * u * u);
    const double q = profile_->lambda(-u);
    return z * pzz + (kB - z) * pz(i) + (kB + alpha_) * val[i] + gamma_ * q / u;
}

double SuperSolutionZ0::f0(double y, double xi) const
{
    return std::pow(y, alpha_) * profile_->lambda(xi / std::cbrt(9.0 * y));
}

double SuperSolutionZ0::r0(double y, double xi) const
{
    return std::pow(y, kB + alpha_) * phi(-xi * xi * xi / (9.0 * y));
}

double SuperSolutionZ0::margin(double y, double xi) const
{
    const double z = -xi * xi * xi / (9.0 * y);
    const double q = profile_->lambda(xi / std::cbrt(9.0 * y));
    return 1.5 * alpha_ - std::cbrt(9.0) * gamma_ + 1.5 * (kB + alpha_) * std::cbrt(y * y) * phi(z) / q;
}

bool SuperSolutionZ0::in_region(double y, double xi) const
{
    return y > 0.0 && std::fabs(xi * xi * xi) + y <= r_max_ * r_max_ * r_max_;
}

SuperSolutionZ0::RegionCheck SuperSolutionZ0::check_region(double r, int samples) const
{
    RegionCheck out;
    const double r3 = r * r * r;
    for (int i = 0; i < samples; ++i) {
        const double s = (i + 1.0) / samples;
        const double y = r3 * s * s * s;
        const double xmax = std::cbrt(r3 - y);
        for (int j = 0; j < samples; ++j) {
            const double xi = xmax * (-1.0 + 2.0 * j / (samples - 1.0));
            const double ratio = std::fabs(r0(y, xi)) / f0(y, xi);
            const double m = margin(y, xi);
            if (ratio > out.worst_ratio) {
                out.worst_ratio = ratio;
                out.worst_ratio_at = {y, xi, ratio, m};
            }
            if (m > out.worst_margin) {
                out.worst_margin = m;
                out.worst_margin_at = {y, xi, ratio, m};
            }
        }
    }
    out.ok = out.worst_margin <= 0.0;
    return out;
}

double fhat_eval(const SuperSolutionZ0& z0, double K, double x, double v, double t, bool* flagged)
{
    if (!(t > 0.0)) throw ParameterError("fhat_eval: t must be positive");
    if (!(K > 1.0)) throw ParameterError("fhat_eval: K must exceed 1");
    const double y = std::max(x / (t * std::sqrt(t)), 1e-300);
    const double xi = v / std::sqrt(t);
    const bool inside = z0.in_region(y, xi);
    if (flagged) *flagged = !inside;
    if (!inside) return 1.0;
    return std::min(K * z0.z0(y, xi), 1.0);
}

CompareReport compare_super(const solver::Trajectory& traj, double f0_sup, const BoundFn& bound,
                            const solver::RegionFn& region, double tol)
{
    CompareReport rep;
    rep.worst_excess = -std::numeric_limits<double>::infinity();
    if (!(f0_sup > 0.0)) {
        rep.worst_excess = 0.0;
        rep.pass = true;
        return rep;
    }
    for (const auto& s : traj.snapshots) {
        for (int i = 0; i < s.nx(); ++i)
            for (int j = 0; j < s.nv(); ++j) {
                const double x = s.x[i], v = s.v[j];
                if (region && !region(x, v)) continue;
                const double e = (s.at(i, j) - bound(x, v, s.t)) / f0_sup;
                ++rep.nodes_checked;
                if (e > rep.worst_excess) {
                    rep.worst_excess = e;
                    rep.x = x;
                    rep.v = v;
                    rep.t = s.t;
                }
            }
    }
    if (rep.nodes_checked == 0) rep.worst_excess = 0.0;
    rep.pass = rep.worst_excess <= tol;
    return rep;
}

// ---------------------------------------------------------------------------

double EscapeSubSolution::lam() const
{
    return lambda > 0.0 ? lambda : std::pow(2.0 * std::numbers::pi / rho, 4);
}

namespace {

struct Radial {
    double h, d1, d2;  // h(r), h'(r), h''(r)
};

Radial radial(const EscapeSubSolution& s, double r)
{
    const double pi = std::numbers::pi;
    const double c = 0.25 * s.level;
    if (r < s.rho) {
        const double k = pi / s.rho;
        return {c * (3.0 + std::cos(k * r)), -c * k * std::sin(k * r), -c * k * k * std::cos(k * r)};
    }
    const double sdist = r - s.rho, d = s.delta - sdist;
    if (d <= 0.0) return {0.0, 0.0, 0.0};
    // h'' = -h p2 at the start of the taper and |(-t, 1)|^2 <= 2 on [0, 1]:
    // mu = lambda delta / 8 keeps that term at half of lambda h
    const double mu = s.mu > 0.0 ? s.mu : s.lam() * s.delta / 8.0;
    const double p = mu * sdist * sdist / d;
    const double p1 = mu * sdist * (2.0 * s.delta - sdist) / (d * d);
    const double p2 = 2.0 * mu * s.delta * s.delta / (d * d * d);
    if (p > 700.0) return {0.0, 0.0, 0.0};
    const double h = 0.5 * s.level * std::exp(-p);
    return {h, -h * p1, h * (p1 * p1 - p2)};
}

}  // namespace

double EscapeSubSolution::h(double x, double v) const
{
    return radial(*this, std::hypot(x - x0, v - v0)).h;
}

double EscapeSubSolution::h_dir2(double x, double v, double t) const
{
    const double dx = x - x0, dv = v - v0;
    const double r = std::hypot(dx, dv);
    const auto R = radial(*this, r);
    const double e2 = 1.0 + t * t;  // |(-t, 1)|^2
    if (r < 1e-12) return R.d2 * e2;
    const double proj = (-t * dx + dv) / r;
    return R.d2 * proj * proj + R.d1 / r * (e2 - proj * proj);
}

double EscapeSubSolution::value(double x, double v, double t) const
{
    return std::exp(-lam() * t) * h(x - v * t, v);
}

EscapeReport escape_check(const EscapeSubSolution& sub, const solver::Trajectory& traj, double tol)
{
    EscapeReport rep;
    if (traj.snapshots.empty()) throw ParameterError("escape_check: trajectory has no snapshots");
    const double m0 = traj.snapshots.front().mass();
    const double sup0 = traj.snapshots.front().sup();
    if (!(m0 > 0.0) || !(sub.level > 0.0)) {
        rep.vacuous = rep.inequality_ok = rep.domination_ok = rep.decay_ok = true;
        return rep;
    }
    const double lam = sub.lam();

    // (a) on a polar sample grid of the support, t in [0, 1]
    double worst = std::numeric_limits<double>::infinity();
    const int nr = 400, na = 64, nt = 11;
    const double pi = std::numbers::pi;
    for (int it = 0; it < nt; ++it) {
        const double t = static_cast<double>(it) / (nt - 1);
        for (int ir = 0; ir < nr; ++ir) {
            const double r = (sub.rho + sub.delta) * ir / nr;
            for (int ia = 0; ia < na; ++ia) {
                const double a = 2.0 * pi * ia / na;
                const double x = sub.x0 + r * std::cos(a), v = sub.v0 + r * std::sin(a);
                const double val = (sub.h_dir2(x, v, t) + lam * sub.h(x, v)) / sub.level;
                worst = std::min(worst, val);
            }
        }
    }
    rep.worst_inequality = worst;
    rep.inequality_ok = worst >= -tol;

    // (b) sub-solution below the computed solution
    double dom = -std::numeric_limits<double>::infinity();
    for (const auto& s : traj.snapshots)
        for (int i = 0; i < s.nx(); ++i)
            for (int j = 0; j < s.nv(); ++j)
                dom = std::max(dom, (sub.value(s.x[i], s.v[j], s.t) - s.at(i, j)) / sub.level);
    rep.worst_domination = dom;
    rep.domination_ok = dom <= tol;

    // (c) mass after unit time
    double m1 = std::numeric_limits<double>::quiet_NaN();
    for (const auto& s : traj.snapshots)
        if (std::fabs(s.t - 1.0) < 1e-9) m1 = s.mass();
    if (std::isnan(m1)) {
        for (std::size_t k = 1; k < traj.t.size(); ++k)
            if (traj.t[k] >= 1.0) {
                const double w = (1.0 - traj.t[k - 1]) / (traj.t[k] - traj.t[k - 1]);
                m1 = (1 - w) * traj.mass[k - 1] + w * traj.mass[k];
                break;
            }
    }
    if (std::isnan(m1)) throw ParameterError("escape_check: trajectory does not reach t = 1");
    rep.mass_ratio = m1 / m0;
    rep.shape_bound = 1.0 - sub.rho * (sub.level / sup0) / std::sqrt(2.0);
    rep.decay_ok = rep.mass_ratio < 1.0;
    return rep;
}

// ---------------------------------------------------------------------------

double InfinityBarrier::value(double v, double t) const
{
    if (kind == "quadratic_linear") return 2.0 * t + 1.0 + v * v;
    if (kind == "quadratic_exp") return std::exp(2.0 * t) * (1.0 + v * v);
    return std::exp(theta * t - A * std::sqrt(v * v + 1.0));
}

double InfinityBarrier::residual(double v, double t) const
{
    if (kind == "quadratic_linear") return 2.0 - 2.0;
    if (kind == "quadratic_exp") return 2.0 * std::exp(2.0 * t) * (1.0 + v * v) - 2.0 * std::exp(2.0 * t);
    const double q = v * v + 1.0;
    const double vpp = A * A * v * v / q - A / (q * std::sqrt(q));
    return value(v, t) * (theta - vpp);
}

InfinityBarrier infinity_barrier(const std::string& kind, double A)
{
    InfinityBarrier b;
    b.kind = kind;
    b.A = A;
    if (kind != "quadratic_linear" && kind != "quadratic_exp" && kind != "exp_tail")
        throw ParameterError("infinity_barrier: unknown kind '" + kind + "'");
    // phi_vv / phi approaches A^2 only as |v| -> inf, so the samples run out
    // to |v| = 1e8 on a log scale; a window of |v| <= 50 leaves theta short
    std::vector<double> vs;
    for (int k = -5000; k <= 5000; ++k) vs.push_back(0.01 * k);
    for (int k = 0; k <= 140; ++k) {
        const double v = 50.0 * std::pow(10.0, k * 0.05);
        vs.push_back(v);
        vs.push_back(-v);
    }
    auto min_residual = [&](const InfinityBarrier& c) {
        double worst = std::numeric_limits<double>::infinity();
        for (int it = 0; it <= 4; ++it)
            for (double v : vs) {
                const double t = 0.5 * it;
                const double val = c.value(v, t);
                if (!(val > 0.0)) continue;  // underflow far out in the tail
                worst = std::min(worst, c.residual(v, t) / val);
            }
        return worst;
    };
    if (kind == "exp_tail") {
        if (!(A > 0.0)) throw ParameterError("infinity_barrier: A must be positive");
        double lo = 0.0, hi = A * A + A;
        for (int it = 0; it < 60; ++it) {
            b.theta = 0.5 * (lo + hi);
            (min_residual(b) >= 0.0 ? hi : lo) = b.theta;
        }
        b.theta = hi;
    }
    if (min_residual(b) < 0.0) throw ParameterError("infinity_barrier: residual negative on samples");
    return b;
}

}  // namespace kfp::barriers
