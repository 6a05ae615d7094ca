#include "gen.hpp"

#include "kfp/errors.hpp"
#include "kfp/grid_solver.hpp"
#include "kfp/quadrature.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace kfp;
using namespace kfp::solver;
using testgen::Gen;
using testgen::forall;

TEST_CASE("grids: faces, nodes and weights")
{
    forall(20, 31, [](Gen& g) {
        GridSpec s;
        s.nx = g.integer(4, 80);
        s.nv = 2 * g.integer(4, 60);
        s.vmax = g.uniform(3.0, 10.0);
        s.x_grading = g.coin() ? 0.0 : g.uniform(0.5, 20.0);
        s.v_grading = g.coin() ? 0.0 : g.uniform(0.5, 8.0);
        const auto xf = make_x_faces(s);
        REQUIRE(xf.size() == static_cast<std::size_t>(s.nx + 1));
        CHECK(xf.front() == 0.0);
        CHECK(xf.back() == 1.0);
        for (int i = 0; i < s.nx; ++i) {
            CHECK(xf[i + 1] > xf[i]);
            // graded grids are mirror images about x = 1/2
            CHECK(xf[i + 1] - xf[i] == doctest::Approx(xf[s.nx - i] - xf[s.nx - i - 1]).epsilon(1e-6));
        }
        const auto f = make_field(s);
        CHECK(f.v.front() == -s.vmax);
        CHECK(f.v.back() == s.vmax);
        CHECK(f.zero_velocity_index() >= 0);
        double wx = 0.0;
        for (double w : f.wx) wx += w;
        CHECK(wx == doctest::Approx(1.0).epsilon(1e-13));
        for (int j = 0; j < f.nv(); ++j) CHECK(f.v[j] == doctest::Approx(-f.v[f.nv() - 1 - j]));
    });
    GridSpec s;
    s.nx = 256;
    s.x_grading = 20.0;
    const auto xf = make_x_faces(s);
    CHECK(xf[1] < 1e-9);
}

namespace {

// Steps `steps` times and checks the discrete maximum principle and the
// mass bookkeeping after every step.
void check_principles(PhaseField f, const std::string& scheme, double dt, int steps)
{
    const double sup0 = f.sup();
    double m = f.mass();
    for (int n = 0; n < steps; ++n) {
        const auto st = scheme == "upwind" ? step_upwind(f, dt) : step_implicit(f, dt);
        const double m1 = f.mass();
        CHECK(*std::min_element(f.f.begin(), f.f.end()) >= 0.0);
        CHECK(f.sup() <= sup0 * (1.0 + 1e-12));
        CHECK(m1 <= m * (1.0 + 1e-12));
        CHECK(st.absorbed_left >= 0.0);
        CHECK(st.absorbed_right >= 0.0);
        CHECK(std::fabs(m1 - m + st.absorbed_left + st.absorbed_right + st.leakage) <= 1e-9 * m);
        m = m1;
    }
}

}  // namespace

TEST_CASE("upwind: positivity, maximum principle and bookkeeping at the stability limit")
{
    forall(8, 32, [](Gen& g) {
        GridSpec s;
        s.nx = g.integer(8, 48);
        s.nv = 2 * g.integer(8, 40);
        s.vmax = g.uniform(4.0, 8.0);
        auto f = make_field(s);
        testgen::random_bumps(g, f, g.integer(1, 4));
        check_principles(f, "upwind", stable_dt(f, g.uniform(0.5, 1.0), "upwind"), 30);
    });
}

TEST_CASE("implicit: positivity and maximum principle with steps far above the explicit limit")
{
    forall(6, 33, [](Gen& g) {
        GridSpec s;
        s.nx = g.integer(8, 48);
        s.nv = 2 * g.integer(8, 40);
        s.x_grading = g.coin() ? 0.0 : g.uniform(1.0, 12.0);
        s.v_grading = g.coin() ? 0.0 : g.uniform(1.0, 6.0);
        auto f = make_field(s);
        testgen::random_bumps(g, f, g.integer(1, 4));
        const double dt = stable_dt(f, 1.0, "upwind") * g.log_uniform(10.0, 1000.0);
        check_principles(f, "implicit", dt, 6);
    });
    CHECK(std::isinf(stable_dt(make_field(GridSpec{}), 1.0, "implicit")));
}

TEST_CASE("implicit and upwind agree on mass decay")
{
    SolverConfig c;
    c.grid.nx = 48;
    c.grid.nv = 96;
    c.t_end = 0.5;
    c.cfl = 0.9;
    auto f0 = make_field(c.grid);
    fill_initial(f0, InitialData{});
    const auto a = run_solve(c, f0);
    c.scheme = "implicit";
    c.dt = a.dt;
    const auto b = run_solve(c, f0);
    CHECK(b.mass.back() == doctest::Approx(a.mass.back()).epsilon(0.02));
    CHECK(a.bookkeeping_error <= 1e-12);
    CHECK(b.bookkeeping_error <= 1e-9);
}

TEST_CASE("a fixed step above the stability limit is rejected")
{
    SolverConfig c;
    c.grid.nx = 32;
    c.grid.nv = 64;
    c.dt = 0.05;
    const auto f0 = make_field(c.grid);
    CHECK_THROWS_WITH_AS(run_solve(c, f0), doctest::Contains("CFL"), ParameterError);
    c.scheme = "implicit";
    CHECK_NOTHROW(run_solve(c, f0));
    CHECK_THROWS_AS(stable_dt(f0, 1.5, "upwind"), ParameterError);
    CHECK_THROWS_AS(stable_dt(f0, 0.5, "spectral"), ParameterError);
}

TEST_CASE("zero data stays zero")
{
    for (const char* scheme : {"upwind", "implicit", "regularized"}) {
        CAPTURE(scheme);
        SolverConfig c;
        c.grid.nx = 16;
        c.grid.nv = 128;
        c.scheme = scheme;
        c.eps = 0.2;
        c.t_end = 0.1;
        auto f0 = make_field(c.grid);
        fill_initial(f0, InitialData{.kind = "zero"});
        const auto tr = run_solve(c, f0);
        for (double m : tr.mass) CHECK(m == 0.0);
        CHECK(tr.absorbed_left == 0.0);
    }
}

TEST_CASE("cut-offs: beta, eta and the mollifier")
{
    forall(30, 34, [](Gen& g) {
        const CutoffSet cut(g.uniform(0.01, 0.2));
        const double e = cut.eps(), v = g.uniform(-3.0, 3.0), x = g.uniform(0.0, 1.0);
        CHECK(std::fabs(cut.beta(v)) <= std::fabs(v));
        if (std::fabs(v) < e * e) CHECK(cut.beta(v) == 0.0);
        if (std::fabs(v) > 2 * e * e) CHECK(cut.beta(v) == v);
        CHECK(cut.eta(x) >= 0.0);
        CHECK(cut.eta(x) <= 1.0);
        if (x < e || x > 1 - e) CHECK(cut.eta(x) == 0.0);
        if (x > 2 * e && x < 1 - 2 * e) CHECK(cut.eta(x) == 1.0);
        // speed stays between beta(v) and v
        const double s = cut.speed(x, v), lo = std::min(cut.beta(v), v), hi = std::max(cut.beta(v), v);
        CHECK(s >= lo);
        CHECK(s <= hi);
        const double h = 1e-7;
        if (x > 0.01 && x < 0.99)
            CHECK(cut.eta_prime(x) == doctest::Approx((cut.eta(x + h) - cut.eta(x - h)) / (2 * h)).epsilon(1e-4).scale(1.0));
    });
    const double m0 = quad::adaptive([](double z) { return CutoffSet::xi(z); }, -3, 3, 1e-13);
    const double m2 = quad::adaptive([](double z) { return z * z * CutoffSet::xi(z); }, -3, 3, 1e-13);
    CHECK(m0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(CutoffSet(0.3), ParameterError);
}

TEST_CASE("lattice weights: exact moments and positivity")
{
    forall(40, 35, [](Gen& g) {
        const CutoffSet cut(g.uniform(0.02, 0.2));
        const double dv = cut.eps() / g.uniform(0.8, 20.0);
        const auto w = cut.lattice_weights(dv);
        double s0 = 0, s1 = 0, s2 = 0;
        for (auto [k, x] : w) {
            CHECK(x >= 0.0);
            s0 += x;
            s1 += k * x;
            s2 += (k * dv / cut.eps()) * (k * dv / cut.eps()) * x;
        }
        CHECK(s0 == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(std::fabs(s1) <= 1e-14);
        CHECK(s2 == doctest::Approx(1.0).epsilon(1e-13));
    });
    CHECK_THROWS_AS(CutoffSet(0.05).lattice_weights(0.1), ParameterError);
}

TEST_CASE("jump operator annihilates constants and acts as the second derivative on quadratics")
{
    GridSpec s;
    s.nx = 4;
    s.nv = 400;
    s.vmax = 4.0;
    auto f = make_field(s);
    const CutoffSet cut(0.1);
    for (int i = 0; i < f.nx(); ++i)
        for (int j = 0; j < f.nv(); ++j) f.at(i, j) = 1.0 + f.v[j] * f.v[j];
    const auto q = jump_q_eps(f, cut);
    const int j0 = f.zero_velocity_index();
    for (int j = j0 - 50; j <= j0 + 50; ++j) CHECK(q.at(1, j) == doctest::Approx(2.0).epsilon(1e-10));
    s.v_grading = 2.0;
    CHECK_THROWS_AS(jump_q_eps(make_field(s), cut), ParameterError);
}

TEST_CASE("regularized characteristics: Jacobian within the Gronwall bound")
{
    forall(4, 36, [](Gen& g) {
        const CutoffSet cut(g.uniform(0.05, 0.2));
        std::vector<std::pair<double, double>> pts;
        const double e2 = cut.eps() * cut.eps();
        for (int k = 0; k < 6; ++k) pts.emplace_back(g.uniform(0.0, 1.0), g.uniform(-2.0, 2.0));
        // slow samples are the only ones whose characteristics feel eta'
        for (int k = 0; k < 3; ++k) pts.emplace_back(g.uniform(0.0, 1.0), g.uniform(-2.0 * e2, 2.0 * e2));
        const auto rep = jacobian_bounds_check(cut, g.uniform(0.1, 1.0), pts);
        CHECK(rep.within_bound);
        CHECK(rep.c_const > 0.0);
    });
}

TEST_CASE("regularized: non-negative and mass non-increasing")
{
    forall(4, 37, [](Gen& g) {
        GridSpec s;
        s.nx = 32;
        s.nv = 128;
        s.vmax = 6.0;
        auto f = make_field(s);
        testgen::random_bumps(g, f, 2);
        const CutoffSet cut(g.uniform(0.12, 0.2));
        const double dt = stable_dt(f, 0.9, "regularized", cut.eps());
        double m = f.mass();
        for (int n = 0; n < 20; ++n) {
            step_regularized(f, dt, cut);
            CHECK(*std::min_element(f.f.begin(), f.f.end()) >= 0.0);
            CHECK(f.mass() <= m * (1 + 1e-9));
            m = f.mass();
        }
    });
}

TEST_CASE("initial data kinds")
{
    auto f = make_field(GridSpec{});
    for (const char* kind : {"gaussian", "ball", "product", "blobs"}) {
        CAPTURE(kind);
        InitialData d;
        d.kind = kind;
        fill_initial(f, d);
        CHECK(f.mass() > 0.0);
        CHECK(*std::min_element(f.f.begin(), f.f.end()) >= 0.0);
        for (int i = 0; i < f.nx(); ++i) CHECK(f.at(i, 0) == 0.0);
    }
    CHECK_THROWS_AS(initial_value(InitialData{.kind = "delta"}, 0.5, 0.0), ParameterError);
}
