#pragma once

// Property testing without a framework: a seeded generator and a driver that
// replays each case from (seed, index) so a failure names its reproducer.

#include "kfp/phase_field.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <random>

namespace kfp::testgen {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
    double log_uniform(double a, double b) { return a * std::pow(b / a, uniform(0.0, 1.0)); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
    bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
    std::uint64_t bits() { return rng_(); }

    // Non-integer value in (a, b): keeps away from poles of Gamma.
    double off_integer(double a, double b, double gap = 0.05)
    {
        for (;;) {
            const double x = uniform(a, b);
            if (std::fabs(x - std::round(x)) > gap) return x;
        }
    }

private:
    std::mt19937_64 rng_;
};

template <class Prop>
void forall(int cases, std::uint64_t seed, Prop&& prop)
{
    for (int k = 0; k < cases; ++k) {
        CAPTURE(seed);
        CAPTURE(k);
        Gen g(seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(k));
        prop(g);
    }
}

// Smooth non-negative field: a few Gaussian bumps inside the domain, zero on
// the truncation rows.
inline void random_bumps(Gen& g, PhaseField& f, int bumps = 3)
{
    struct B {
        double x, v, sx, sv, a;
    };
    std::vector<B> bs;
    for (int k = 0; k < bumps; ++k)
        bs.push_back({g.uniform(0.2, 0.8), g.uniform(-2.0, 2.0), g.uniform(0.03, 0.2),
                      g.uniform(0.2, 1.0), g.uniform(0.1, 2.0)});
    for (int i = 0; i < f.nx(); ++i)
        for (int j = 0; j < f.nv(); ++j) {
            double s = 0.0;
            if (j > 0 && j + 1 < f.nv())
                for (const auto& b : bs) {
                    const double dx = (f.x[i] - b.x) / b.sx, dv = (f.v[j] - b.v) / b.sv;
                    s += b.a * std::exp(-0.5 * (dx * dx + dv * dv));
                }
            f.at(i, j) = s;
        }
}

inline double rel_err(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

}  // namespace kfp::testgen
