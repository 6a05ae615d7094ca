#include "gen.hpp"

#include "kfp/barriers.hpp"
#include "kfp/errors.hpp"
#include "kfp/specfun.hpp"

#include <doctest.h>

#include <cmath>

using namespace kfp;
using namespace kfp::barriers;
using testgen::Gen;
using testgen::forall;
using testgen::rel_err;

namespace {

const SelfSimilarProfile& profile()
{
    static const SelfSimilarProfile p(0.1);
    return p;
}

const SuperSolutionZ0& z0()
{
    static const SuperSolutionZ0 z(profile());
    return z;
}

// v f_x - f_vv by centred differences
template <class F>
double steady_residual(F f, double x, double v, double h)
{
    const double fx = (f(x + h, v) - f(x - h, v)) / (2 * h);
    const double fvv = (f(x, v + h) - 2 * f(x, v) + f(x, v - h)) / (h * h);
    return v * fx - fvv;
}

}  // namespace

TEST_CASE("hermite table reproduces cubics")
{
    forall(30, 51, [](Gen& g) {
        const double c0 = g.uniform(-2, 2), c1 = g.uniform(-2, 2), c2 = g.uniform(-2, 2), c3 = g.uniform(-2, 2);
        auto p = [&](double s) { return c0 + s * (c1 + s * (c2 + s * c3)); };
        auto dp = [&](double s) { return c1 + s * (2 * c2 + 3 * s * c3); };
        const double lo = g.uniform(-3, 0), hi = lo + g.uniform(0.5, 4);
        const int n = g.integer(2, 30);
        std::vector<double> val, der;
        for (int i = 0; i <= n; ++i) {
            const double s = lo + (hi - lo) * i / n;
            val.push_back(p(s));
            der.push_back(dp(s));
        }
        const HermiteTable t(lo, hi, val, der);
        for (int k = 0; k < 20; ++k) {
            const double s = g.uniform(lo, hi);
            CHECK(t.value(s) == doctest::Approx(p(s)).epsilon(1e-12).scale(1.0));
            CHECK(t.deriv(s) == doctest::Approx(dp(s)).epsilon(1e-11).scale(1.0));
        }
        CHECK(t.contains(hi));
        CHECK(!t.contains(hi + 1e-9));
    });
}

TEST_CASE("profile table matches direct evaluation")
{
    const auto& p = profile();
    forall(200, 52, [&](Gen& g) {
        const double z = g.uniform(-80.0, 80.0);
        CHECK(rel_err(p.lambda(z), specfun::lambda_profile(0.1, z)) < 1e-8);
        CHECK(std::fabs(p.lambda_deriv(z) - specfun::lambda_profile_deriv(0.1, z)) <=
              1e-7 * (1.0 + std::fabs(specfun::lambda_profile_deriv(0.1, z))));
    });
}

TEST_CASE("steady states solve v f_x = f_vv at second order")
{
    const auto& p = profile();
    // the tabulated profile is only C^1, so differences go through the direct one
    auto reg = [](double x, double v) { return std::pow(x, 0.1) * specfun::lambda_profile(0.1, v / std::cbrt(9 * x)); };
    auto sing = [](double x, double v) { return steady_singular(-0.1, 0, x, v); };
    forall(20, 53, [&](Gen& g) {
        const double x = g.uniform(0.2, 0.8), v = g.uniform(-2.0, 2.0);
        for (int which = 0; which < 2; ++which) {
            CAPTURE(which);
            auto r = [&](double h) {
                return which == 0 ? steady_residual(reg, x, v, h) : steady_residual(sing, x, v, h);
            };
            const double r1 = std::fabs(r(2e-3)), r2 = std::fabs(r(1e-3));
            CHECK(r2 <= 1e-4);
            if (r1 > 1e-9) CHECK(r1 / r2 == doctest::Approx(4.0).epsilon(0.25));
        }
        // wall 1 is the mirror image of wall 0
        CHECK(steady_singular(-0.1, 1, x, v) == doctest::Approx(steady_singular(-0.1, 0, 1 - x, -v)).epsilon(1e-14));
        CHECK(rel_err(steady_regular_f0(p, x, v), reg(x, v)) < 1e-8);
    });
    CHECK_THROWS_AS(steady_regular_f0(p, 0.0, 1.0), ParameterError);
}

TEST_CASE("Z0: validated region, margin and domination")
{
    const auto& z = z0();
    CHECK(z.gamma() == doctest::Approx(0.3));
    CHECK(z.r_max() > 0.0);
    CHECK(z.worst_margin() <= 0.0);
    CHECK(z.worst_ratio() <= 0.2);
    const auto rc = z.check_region(z.r_max(), 40);
    CHECK(rc.ok);
    CHECK(rc.worst_margin <= 0.0);
    forall(200, 54, [&](Gen& g) {
        const double r = z.r_max() * std::cbrt(g.uniform(0.0, 1.0));
        const double th = g.uniform(0.0, 1.0);
        const double y = th * r * r * r, xi = std::cbrt((1 - th) * r * r * r) * (g.coin() ? 1 : -1);
        if (!(y > 0.0)) return;
        CHECK(z.in_region(y, xi));
        CHECK(z.margin(y, xi) <= 1e-12);
        CHECK(std::fabs(z.r0(y, xi)) <= 0.2 * z.f0(y, xi));
        CHECK(z.z0(y, xi) > 0.0);
    });
    CHECK_THROWS_AS(SuperSolutionZ0(profile(), Z0Options{.gamma = 0.1}), ParameterError);
}

TEST_CASE("Z0: tabulated phi satisfies its ODE away from z = 0")
{
    const auto& z = z0();
    const int n = z.table_size();
    const double h = 44.0 / (n - 1);
    for (int i = 1; i < n - 1; ++i) {
        const double u = -22.0 + i * h;
        if (std::fabs(u) < 0.5) continue;
        const double zz = u * u * u;
        const double scale = std::fabs((2.0 / 3.0 + 0.1) * z.phi(zz)) + std::fabs(z.phi_z(zz) * (2.0 / 3.0 - zz)) +
                             0.3 * profile().lambda(-u) / std::fabs(u);
        CAPTURE(u);
        CHECK(std::fabs(z.ode_residual_at_node(i)) <= 1e-3 * scale);
    }
    CHECK_THROWS_AS(z.ode_residual_at_node(0), ParameterError);
    bool extra = false;
    z.phi(1e6, &extra);
    CHECK(extra);
}

TEST_CASE("fhat stays in [0, 1], is one outside the region and grows with K")
{
    const auto& z = z0();
    forall(300, 55, [&](Gen& g) {
        const double x = g.log_uniform(1e-12, 1.0), v = g.uniform(-4.0, 4.0), t = g.log_uniform(1e-3, 2.0);
        bool flagged = false;
        const double f = fhat_eval(z, 4.0, x, v, t, &flagged);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
        if (flagged) CHECK(f == 1.0);
        CHECK(fhat_eval(z, 2.0, x, v, t) <= f);
    });
        // at v = 0 the bound decays like x^alpha as x -> 0; elsewhere it tends
    // to a multiple of |v|^{3 alpha}
    double prev = 2.0;
    for (int k = 4; k <= 40; k += 4) {
        const double f = fhat_eval(z, 4.0, std::pow(10.0, -k), 0.0, 1.0);
        CHECK(f <= prev);
        prev = f;
    }
    CHECK(prev < 0.01);
}

TEST_CASE("escape sub-solution: positive bump, level on the ball and the inequality")
{
    forall(10, 56, [](Gen& g) {
        EscapeSubSolution s;
        s.x0 = g.uniform(0.3, 0.7);
        s.v0 = g.uniform(-2.0, 2.0);
        s.rho = g.uniform(0.05, 0.2);
        s.delta = g.uniform(0.3, 0.6) * s.rho;
        s.level = g.uniform(0.1, 2.0);
        CHECK(s.lam() == doctest::Approx(std::pow(2 * std::acos(-1.0) / s.rho, 4)));
        for (int k = 0; k < 200; ++k) {
            const double ang = g.uniform(0, 2 * std::acos(-1.0)), r = g.uniform(0.0, 1.5 * s.rho);
            const double x = s.x0 + r * std::cos(ang), v = s.v0 + r * std::sin(ang), t = g.uniform(0.0, 1.0);
            const double h = s.h(x, v);
            CHECK(h >= 0.0);
            if (r <= s.rho - s.delta) CHECK(h >= 0.5 * s.level * (1 - 1e-12));
            CHECK(s.h_dir2(x, v, t) + s.lam() * h >= -1e-9 * s.level * s.lam());
            // directional second derivative against differences; the taper
            // varies on a scale ~ (lambda)^{-1/2}, and h'' jumps at r = rho
            const double e = 1e-6;
            if (std::fabs(r - s.rho) < 4 * e) continue;
            auto hd = [&](double q) { return s.h(x - t * q, v + q); };
            const double fd = (hd(e) - 2 * hd(0) + hd(-e)) / (e * e);
            CHECK(s.h_dir2(x, v, t) == doctest::Approx(fd).epsilon(1e-3).scale(1e-3 * s.level * s.lam()));
        }
    });
}

TEST_CASE("escape sub-solution value follows the free transport")
{
    EscapeSubSolution s;
    const double t = 0.3, x = 0.6, v = 1.1;
    CHECK(s.value(x, v, t) == doctest::Approx(std::exp(-s.lam() * t) * s.h(x - v * t, v)));
}

TEST_CASE("infinity barriers are super-solutions")
{
    for (const char* kind : {"quadratic_linear", "quadratic_exp", "exp_tail"}) {
        CAPTURE(kind);
        const auto b = infinity_barrier(kind, 1.5);
        forall(100, 57, [&](Gen& g) {
            const double v = g.coin() ? g.uniform(-60, 60) : g.log_uniform(60, 400) * (g.coin() ? 1 : -1);
            const double t = g.uniform(0, 3);
            const double val = b.value(v, t);
            CHECK(val >= 0.0);
            if (std::isnormal(val)) CHECK(b.residual(v, t) >= -1e-12 * val);
        });
    }
    // the bisected theta is sharp on the sample grid
    auto b = infinity_barrier("exp_tail", 1.5);
    CHECK(b.theta > 0.0);
    b.theta *= 0.99;
    bool negative = false;
    for (int k = -5000; k <= 5000; ++k) negative = negative || b.residual(0.01 * k, 0.0) < 0.0;
    CHECK(negative);
    CHECK_THROWS_AS(infinity_barrier("cubic"), ParameterError);
    CHECK_THROWS_AS(infinity_barrier("exp_tail", -1.0), ParameterError);
}
