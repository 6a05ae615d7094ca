#include "gen.hpp"

#include "kfp/particle_mc.hpp"

#include <doctest.h>

#include <cmath>

using namespace kfp;
using namespace kfp::mc;
using testgen::Gen;
using testgen::forall;

TEST_CASE("philox4x32-10 known answers")
{
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("normal pairs: moments and independence of the two draws")
{
    const long n = 200000;
    double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0, s4 = 0;
    for (long k = 0; k < n; ++k) {
        const auto z = normal_pair(7, 0, static_cast<std::uint64_t>(k), 3);
        s1 += z[0];
        s2 += z[1];
        s11 += z[0] * z[0];
        s22 += z[1] * z[1];
        s12 += z[0] * z[1];
        s4 += z[0] * z[0] * z[0] * z[0];
    }
    const double se = 1.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::fabs(s1 / n) < 5 * se);
    CHECK(std::fabs(s2 / n) < 5 * se);
    CHECK(std::fabs(s11 / n - 1.0) < 5 * std::sqrt(2.0) * se);
    CHECK(std::fabs(s22 / n - 1.0) < 5 * std::sqrt(2.0) * se);
    CHECK(std::fabs(s12 / n) < 5 * se);
    CHECK(std::fabs(s4 / n - 3.0) < 5 * std::sqrt(96.0) * se);
    // distinct streams and counters give distinct draws
    CHECK(normal_pair(7, 0, 1, 3) != normal_pair(7, 1, 1, 3));
    CHECK(normal_pair(7, 0, 1, 3) != normal_pair(7, 0, 1, 4));
    CHECK(normal_pair(7, 0, 1, 3) == normal_pair(7, 0, 1, 3));
}

TEST_CASE("results do not depend on the thread count")
{
    for (const char* scheme : {"euler", "exact"}) {
        CAPTURE(scheme);
        McConfig c;
        c.scheme = scheme;
        c.n = 4000;
        c.t_end = 0.5;
        c.seed = 99;
        solver::InitialData init;
        auto a = make_ensemble(c, init);
        run_to_end(a, c);
        c.threads = 3;
        auto b = make_ensemble(c, init);
        run_to_end(b, c);
        CHECK(a.x == b.x);
        CHECK(a.v == b.v);
        CHECK(a.exit_time == b.exit_time);
        CHECK(a.side == b.side);
    }
}

TEST_CASE("ballistic particles exit at the predicted time and velocity")
{
    forall(20, 41, [](Gen& g) {
        McConfig c;
        c.noise_scale = 0.0;
        c.n = 3;
        c.t_end = 10.0;
        c.dt = 1e-3;
        solver::InitialData init;
        init.kind = "point";
        init.x0 = g.uniform(0.05, 0.95);
        init.v0 = g.coin() ? g.uniform(0.3, 3.0) : -g.uniform(0.3, 3.0);
        auto e = make_ensemble(c, init);
        run_to_end(e, c);
        const double t_exit = init.v0 > 0 ? (1.0 - init.x0) / init.v0 : init.x0 / -init.v0;
        for (long i = 0; i < e.size(); ++i) {
            CHECK(e.side[i] == (init.v0 > 0 ? Side::Right : Side::Left));
            CHECK(e.exit_time[i] == doctest::Approx(t_exit).epsilon(1e-9));
            CHECK(e.exit_velocity[i] == init.v0);
        }
    });
}

TEST_CASE("half line never exits to the right")
{
    McConfig c;
    c.geometry = "half_line";
    c.scheme = "exact";
    c.n = 2000;
    c.t_end = 20.0;
    solver::InitialData init;
    init.kind = "point";
    init.x0 = 1.0;
    init.v0 = 0.0;
    auto e = make_ensemble(c, init);
    run_to_end(e, c);
    long left = 0;
    for (auto s : e.side) {
        CHECK(s != Side::Right);
        left += s == Side::Left;
    }
    CHECK(left > 0);
    CHECK(e.alive() == e.size() - left);
}

TEST_CASE("euler and exact schemes agree on survival")
{
    McConfig c;
    c.n = 20000;
    c.t_end = 0.6;
    c.dt = 2e-4;
    c.seed = 5;
    solver::InitialData init;
    auto a = make_ensemble(c, init);
    run_to_end(a, c);
    c.scheme = "exact";
    c.seed = 6;
    auto b = make_ensemble(c, init);
    run_to_end(b, c);
    const std::vector<double> ts{0.2, 0.4, 0.6};
    const auto sa = survival_curve(a, ts), sb = survival_curve(b, ts);
    for (std::size_t k = 0; k < ts.size(); ++k) {
        CAPTURE(ts[k]);
        const double se = std::hypot(sa.stderr_[k], sb.stderr_[k]);
        // the Euler scheme misses excursions between steps: O(sqrt dt) bias upwards
        CHECK(std::fabs(sa.alive_frac[k] - sb.alive_frac[k]) <= 4 * se + 0.01);
    }
}

TEST_CASE("ensemble sampling, survival curve and exit histograms")
{
    McConfig c;
    c.n = 5000;
    c.t_end = 1.0;
    solver::InitialData init;
    auto e = make_ensemble(c, init);
    for (long i = 0; i < e.size(); ++i) {
        CHECK(e.x[i] > 0.0);
        CHECK(e.x[i] < 1.0);
    }
    run_to_end(e, c);
    std::vector<double> ts;
    for (int k = 0; k <= 10; ++k) ts.push_back(0.1 * k);
    const auto s = survival_curve(e, ts);
    CHECK(s.alive_frac.front() == 1.0);
    for (std::size_t k = 1; k < ts.size(); ++k) CHECK(s.alive_frac[k] <= s.alive_frac[k - 1]);
    CHECK(s.alive_frac.back() == doctest::Approx(static_cast<double>(e.alive()) / e.size()));

    const auto h = exit_flux(e, ts, {-8, -4, 0, 4, 8});
    long total = 0;
    for (long n : h.counts) total += n;
    CHECK(total == h.total);
    CHECK(h.total == e.size() - e.alive());
    CHECK(!h.empty_warning);
    // left exits carry v < 0 and right exits v > 0
    const std::size_t nt = ts.size() - 1, nv = 4;
    for (std::size_t it = 0; it < nt; ++it) {
        CHECK(h.counts[(0 * nt + it) * nv + 2] + h.counts[(0 * nt + it) * nv + 3] == 0);
        CHECK(h.counts[(1 * nt + it) * nv + 0] + h.counts[(1 * nt + it) * nv + 1] == 0);
    }

    // the flux integrates to the absorbed fraction
    const auto fs = flux_series(e, ts);
    double absorbed = 0.0;
    for (std::size_t k = 0; k < fs.t_mid.size(); ++k) absorbed += (fs.left[k] + fs.right[k]) * (ts[k + 1] - ts[k]);
    CHECK(absorbed == doctest::Approx(1.0 - s.alive_frac.back()).epsilon(1e-12));
}

TEST_CASE("an ensemble that never exits warns on an empty histogram")
{
    McConfig c;
    c.n = 10;
    c.t_end = 1e-3;
    c.noise_scale = 0.0;
    solver::InitialData init;
    init.kind = "point";
    auto e = make_ensemble(c, init);
    run_to_end(e, c);
    const auto h = exit_flux(e, {0.0, 1.0}, {-1.0, 1.0});
    CHECK(h.empty_warning);
    CHECK(h.total == 0);
}
