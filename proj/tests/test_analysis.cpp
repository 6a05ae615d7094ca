#include "gen.hpp"

#include "kfp/analysis.hpp"
#include "kfp/barriers.hpp"
#include "kfp/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace kfp;
using namespace kfp::analysis;
using testgen::Gen;
using testgen::forall;

TEST_CASE("fit_line: exact on lines, consistent under noise")
{
    forall(50, 61, [](Gen& g) {
        const double a = g.uniform(-3, 3), b = g.uniform(-3, 3);
        const int n = g.integer(2, 40);
        std::vector<double> x, y;
        for (int k = 0; k < n; ++k) {
            x.push_back(g.uniform(-5, 5) + 11.0 * k);
            y.push_back(a + b * x.back());
        }
        const auto f = fit_line(x, y);
        CHECK(f.slope == doctest::Approx(b).epsilon(1e-10).scale(1.0));
        CHECK(f.intercept == doctest::Approx(a).epsilon(1e-9).scale(1.0));
        CHECK(f.n == n);
    });
    // with unit Gaussian noise the slope error stays within a few standard errors
    int outside = 0;
    forall(200, 62, [&](Gen& g) {
        std::normal_distribution<double> nd;
        std::mt19937_64 rng(g.bits());
        std::vector<double> x, y;
        for (int k = 0; k < 30; ++k) {
            x.push_back(k);
            y.push_back(1.0 + 0.5 * k + nd(rng));
        }
        const auto f = fit_line(x, y);
        outside += std::fabs(f.slope - 0.5) > 3 * f.slope_se;
    });
    CHECK(outside <= 5);
    CHECK_THROWS_AS(fit_line({1.0}, {2.0}), ParameterError);
    CHECK_THROWS_AS(fit_line({1.0, 1.0}, {2.0, 3.0}), ParameterError);
}

TEST_CASE("exponential fits recover the rate of a perturbed exponential")
{
    std::vector<double> t, y;
    for (int k = 0; k <= 400; ++k) {
        t.push_back(0.025 * k);
        y.push_back(std::exp(-2.0 * t.back()) * (1.0 + 0.01 * std::sin(t.back())));
    }
    const auto f = fit_exponential(t, y, 1.0, 10.0);
    CHECK(f.kappa == doctest::Approx(2.0).epsilon(0.005));
    CHECK(f.r2 > 0.9999);
    const auto a = fit_exponential_auto(t, y);
    CHECK(std::fabs(a.kappa - 2.0) <= 0.01);
    CHECK(a.t_hi == doctest::Approx(10.0));
    // an early transient is excluded by the automatic window
    for (std::size_t k = 0; k < t.size(); ++k) y[k] = std::exp(-1.0 * t[k]) + std::exp(-6.0 * t[k]) * 50.0;
    const auto b = fit_exponential_auto(t, y);
    CHECK(b.kappa == doctest::Approx(1.0).epsilon(0.01));
    CHECK(b.t_lo > 0.5);
    y[3] = 0.0;
    CHECK_THROWS_AS(fit_exponential(t, y, 0.0, 1.0), ParameterError);
    CHECK_THROWS_AS(fit_exponential_auto({0, 1, 2}, {1, 1, 1}), ParameterError);
}

TEST_CASE("decay lemma rate: closed form, range and monotonicity")
{
    forall(100, 63, [](Gen& g) {
        const double th = g.uniform(0.01, 0.99), be = g.uniform(0.01, 0.99), C = g.uniform(0.1, 5.0);
        const int T = g.integer(1, 20);
        const double mu = decay_lemma_rate(th, be, C * g.uniform(1.0, 3.0), C, T);
        CHECK(mu > 0.0);
        CHECK(mu < 1.0);
        CHECK(mu == doctest::Approx(std::pow(std::max(th, be), 1.0 / (2.0 * (T + 1)))));
        // slower for larger T and for larger theta or beta
        CHECK(decay_lemma_rate(th, be, C, C, T + 1) >= mu);
        CHECK(decay_lemma_rate(std::min(0.995, th + 0.005), be, C, C, T) >= mu);
    });
    CHECK(decay_lemma_rate(0.5, 0.5, 1.0, 1.0, 1) == doctest::Approx(std::pow(0.5, 0.25)));
    CHECK_THROWS_AS(decay_lemma_rate(1.0, 0.5, 1, 1, 1), ParameterError);
    CHECK_THROWS_AS(decay_lemma_rate(0.5, 0.0, 1, 1, 1), ParameterError);
    CHECK_THROWS_AS(decay_lemma_rate(0.5, 0.5, 0.5, 1, 1), ParameterError);
    CHECK_THROWS_AS(decay_lemma_rate(0.5, 0.5, 1, 1, 0), ParameterError);
}

TEST_CASE("sequence families satisfy the geometric bound")
{
    const auto c = check_decay_lemma(200, 60, 20261019);
    CHECK(c.families == 200);
    CHECK(c.violations == 0);
    CHECK(c.worst_ratio <= 1.0);
    CHECK(c.worst_ratio > 0.0);
}

TEST_CASE("holder fit on the steady profile recovers alpha and 3 alpha")
{
    const barriers::SelfSimilarProfile p(0.1);
    const FieldFn f0 = [&](double x, double v) { return barriers::steady_regular_f0(p, x, v); };
    const auto h = holder_fit(f0, 0);
    CHECK(h.exponent_x == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(h.exponent_v == doctest::Approx(0.3).epsilon(0.01));
    // mirrored field at the other wall
    const FieldFn f1 = [&](double x, double v) { return f0(1.0 - x, -v); };
    const auto h1 = holder_fit(f1, 1);
    CHECK(h1.exponent_x == doctest::Approx(h.exponent_x));
    CHECK(h1.exponent_v == doctest::Approx(h.exponent_v));
    // a field that is zero everywhere has no usable levels
    CHECK_THROWS_AS(holder_fit(FieldFn([](double, double) { return 0.0; }), 0), RangeError);
    CHECK_THROWS_AS(holder_fit(f0, 2), ParameterError);
}

TEST_CASE("holder fit on a snapshot of the steady profile")
{
    GridSpec s;
    s.nx = 256;
    s.nv = 512;
    s.x_grading = 12.0;
    s.v_grading = 6.0;
    auto f = make_field(s);
    const barriers::SelfSimilarProfile p(0.1);
    for (int i = 0; i < f.nx(); ++i)
        for (int j = 0; j < f.nv(); ++j) f.at(i, j) = barriers::steady_regular_f0(p, f.x[i], f.v[j]);
    HolderOptions o;
    o.kx_lo = 6;
    o.kx_hi = 14;
    const auto h = holder_fit(f, 0, o);
    CHECK(h.exponent_x == doctest::Approx(0.1).epsilon(0.05));
    CHECK(h.levels_x >= 3);
}

TEST_CASE("tightness of a Gaussian in v")
{
    GridSpec s;
    s.nx = 8;
    s.nv = 800;
    s.vmax = 8.0;
    auto f = make_field(s);
    for (int i = 0; i < f.nx(); ++i)
        for (int j = 1; j + 1 < f.nv(); ++j) f.at(i, j) = std::exp(-0.5 * f.v[j] * f.v[j]);
    const auto r = tightness_check(f, 0.05);
    CHECK(r.B == doctest::Approx(1.96).epsilon(0.02));
    CHECK(!r.hit_truncation);
    CHECK(!tightness_check(f, 1e-6).hit_truncation);
    // cut at |v| = 4, a Gaussian leaves ~6e-5 of its mass beyond the window
    s.vmax = 4.0;
    s.nv = 400;
    auto narrow = make_field(s);
    for (int i = 0; i < narrow.nx(); ++i)
        for (int j = 1; j + 1 < narrow.nv(); ++j) narrow.at(i, j) = std::exp(-0.5 * narrow.v[j] * narrow.v[j]);
    CHECK(tightness_check(narrow, 1e-6).hit_truncation);
    CHECK_THROWS_AS(tightness_check(f, 1.0), ParameterError);
    // B grows as delta shrinks
    forall(20, 64, [&](Gen& g) {
        const double d = g.log_uniform(1e-6, 0.5);
        CHECK(tightness_check(f, d).B >= tightness_check(f, 2 * std::min(d, 0.45)).B);
    });
}

TEST_CASE("series and cascade on a short upwind run")
{
    solver::SolverConfig c;
    c.grid.nx = 32;
    c.grid.nv = 64;
    c.cfl = 0.9;
    c.t_end = 1.5;
    c.snapshot_times = {0.0, 0.5, 1.0, 1.5};
    auto f0 = make_field(c.grid);
    solver::fill_initial(f0, solver::InitialData{});
    const auto tr = solver::run_solve(c, f0);
    const RegionSpec reg{0.3};
    const auto s = compute_series(tr, reg);
    REQUIRE(s.t.size() == 4);
    for (std::size_t k = 0; k < s.t.size(); ++k) {
        CHECK(s.mass[k] == doctest::Approx(tr.snapshots[k].mass()).epsilon(1e-12));
        CHECK(s.zeta_s[k] <= s.sup[k]);
        CHECK(s.sup_q[k] <= s.sup[k]);
        CHECK(s.mass_qe[k] <= s.mass[k] * (1 + 1e-12));
        double h = 0.0;
        for (std::size_t j = 0; j < s.v.size(); ++j) h += s.marginal[k][j] * tr.snapshots[k].wv[j];
        CHECK(h == doctest::Approx(s.mass[k]).epsilon(1e-12));
    }
    const auto cas = cascade_check(s, 0.5);
    CHECK(cas.c_s > 0.0);
    CHECK(cas.theta >= 0.0);
    const auto ts = tightness_series(tr, 0.01);
    CHECK(ts.t.size() == 4);
    CHECK(ts.c_fit > 0.0);
    const auto d = derivative_scaling_check(tr.snapshots.back(), 0);
    CHECK(std::isfinite(d.fx));
    CHECK(std::isfinite(d.fvv));
}

TEST_CASE("region membership")
{
    const RegionSpec r{0.2};
    CHECK(r.in_s(0.001, 0.1));
    CHECK(r.in_s(0.999, -0.1));
    CHECK(!r.in_s(0.5, 0.0));
    CHECK(r.in_q(0.5, 0.0));
    forall(200, 65, [&](Gen& g) {
        const double x = g.uniform(0, 1), v = g.uniform(-1, 1);
        // the half-size set is inside the full one
        if (r.in_half_s(x, v)) CHECK(r.in_s(x, v));
        CHECK(r.in_s(x, v) == r.in_s(1 - x, -v));
    });
}
