#pragma once

#include "kfp/errors.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

namespace kfp::quad {

// Plain compensated sum used inside adaptive_global.
struct KahanSumLite {
    double s = 0.0, c = 0.0;
    void add(double x)
    {
        const double t = s + x;
        c += std::fabs(s) >= std::fabs(x) ? (s - t) + x : (x - t) + s;
        s = t;
    }
};

struct AdaptiveResult {
    double value = 0.0, error = 0.0, l1 = 0.0;
    bool converged = false;
};

// Globally adaptive Gauss-Kronrod (15/31): keeps bisecting the interval with
// the largest error estimate until the total is below max(rel_tol * L1, abs_tol)
// or max_intervals is reached.  Unlike plain recursive bisection this stops on
// pieces whose contribution is negligible in absolute terms.
template <class F>
AdaptiveResult adaptive_global(F&& f, double a, double b, double rel_tol, double abs_tol, int max_intervals)
{
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    struct Piece {
        double a, b, val, err, l1;
        bool operator<(const Piece& o) const { return err < o.err; }
    };
    auto eval = [&](double lo, double hi) {
        Piece p{lo, hi, 0.0, 0.0, 0.0};
        p.val = GK::integrate(f, lo, hi, 0, 0.0, &p.err, &p.l1);
        return p;
    };
    std::priority_queue<Piece> heap;
    heap.push(eval(a, b));
    AdaptiveResult r;
    r.value = heap.top().val;
    r.error = heap.top().err;
    r.l1 = heap.top().l1;
    int count = 1;
    while (true) {
        if (!std::isfinite(r.value)) return r;
        if (r.error <= std::max(rel_tol * r.l1, abs_tol)) {
            r.converged = true;
            break;
        }
        if (count >= max_intervals) break;
        const Piece w = heap.top();
        heap.pop();
        const double m = 0.5 * (w.a + w.b);
        if (!(m > w.a && m < w.b)) break;  // interval no longer splittable
        const Piece l = eval(w.a, m), h = eval(m, w.b);
        heap.push(l);
        heap.push(h);
        ++count;
        // recompute the totals: incremental updates drift when terms cancel
        auto copy = heap;
        KahanSumLite sv, se, sl;
        while (!copy.empty()) {
            sv.add(copy.top().val);
            se.add(copy.top().err);
            sl.add(copy.top().l1);
            copy.pop();
        }
        r.value = sv.s + sv.c;
        r.error = se.s + se.c;
        r.l1 = sl.s + sl.c;
    }
    return r;
}

// Throws QuadratureError when adaptive_global does not converge; max_depth
// bounds the interval count at 64 * max_depth.
template <class F>
double adaptive(F&& f, double a, double b, double rel_tol = 1e-12, unsigned max_depth = 18,
                double abs_tol = 0.0)
{
    const auto r = adaptive_global(f, a, b, rel_tol, abs_tol, 64 * static_cast<int>(max_depth));
    if (!std::isfinite(r.value))
        throw QuadratureError("adaptive quadrature produced a non-finite value", static_cast<int>(max_depth));
    if (!r.converged && r.error > std::max({10.0 * rel_tol * r.l1, abs_tol, 1e-300}))
        throw QuadratureError("adaptive quadrature did not reach tolerance", static_cast<int>(max_depth));
    return r.value;
}

// Same as adaptive(), reporting the error estimate instead of throwing.
template <class F>
double adaptive_est(F&& f, double a, double b, double rel_tol, double* err_out, unsigned max_depth = 18)
{
    const auto r = adaptive_global(f, a, b, rel_tol, 0.0, 64 * static_cast<int>(max_depth));
    if (err_out) *err_out = r.error;
    return r.value;
}

// Piecewise adaptive integration over consecutive breakpoints.
template <class F>
double adaptive_pieces(F&& f, const std::vector<double>& breaks, double rel_tol = 1e-12)
{
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        if (breaks[i + 1] > breaks[i]) s += adaptive(f, breaks[i], breaks[i + 1], rel_tol);
    return s;
}

// Fixed 10-point Gauss-Legendre on [a, b].
template <class F>
double gauss10(F&& f, double a, double b)
{
    return boost::math::quadrature::gauss<double, 10>::integrate(f, a, b);
}

// Composite 10-point Gauss-Legendre over n equal panels.
template <class F>
double composite_gauss(F&& f, double a, double b, int panels)
{
    const double h = (b - a) / panels;
    double s = 0.0;
    for (int i = 0; i < panels; ++i) s += gauss10(f, a + i * h, a + (i + 1) * h);
    return s;
}

// Trapezoid weights for arbitrary increasing nodes.
std::vector<double> trapezoid_weights(const std::vector<double>& nodes);

// Compensated (Neumaier) summation accumulator.
class KahanSum {
public:
    void add(double x)
    {
        const double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0, comp_ = 0.0;
};

}  // namespace kfp::quad
