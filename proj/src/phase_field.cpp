#include "kfp/phase_field.hpp"

#include "kfp/errors.hpp"
#include "kfp/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace kfp {

double PhaseField::mass() const
{
    quad::KahanSum s;
    for (int i = 0; i < nx(); ++i) {
        double row = 0.0;
        for (int j = 0; j < nv(); ++j) row += at(i, j) * wv[j];
        s.add(row * wx[i]);
    }
    return s.value();
}

double PhaseField::sup() const
{
    double m = 0.0;
    for (double y : f) m = std::max(m, std::fabs(y));
    return m;
}

namespace {

// Largest k with nodes[k] <= q, clamped to [0, n-2].
int bracket(const std::vector<double>& nodes, double q)
{
    auto it = std::upper_bound(nodes.begin(), nodes.end(), q);
    int k = static_cast<int>(it - nodes.begin()) - 1;
    return std::clamp(k, 0, static_cast<int>(nodes.size()) - 2);
}

}  // namespace

double PhaseField::interpolate(double xq, double vq) const
{
    if (xq < x.front() || xq > x.back() || vq < v.front() || vq > v.back()) return 0.0;
    const int i = bracket(x, xq), j = bracket(v, vq);
    const double sx = (xq - x[i]) / (x[i + 1] - x[i]);
    const double sv = (vq - v[j]) / (v[j + 1] - v[j]);
    return (1 - sx) * ((1 - sv) * at(i, j) + sv * at(i, j + 1)) +
           sx * ((1 - sv) * at(i + 1, j) + sv * at(i + 1, j + 1));
}

int PhaseField::zero_velocity_index() const
{
    for (int j = 0; j < nv(); ++j)
        if (v[j] == 0.0) return j;
    return -1;
}

namespace {

// Map of [0,1] onto itself that clusters points near s = 0 for strength g > 0.
double cluster_left(double s, double g)
{
    if (g <= 0.0) return s;
    return std::expm1(g * s) / std::expm1(g);
}

}  // namespace

std::vector<double> make_x_faces(const GridSpec& g)
{
    if (g.nx < 4) throw ParameterError("GridSpec: nx must be at least 4");
    std::vector<double> faces(g.nx + 1);
    for (int i = 0; i <= g.nx; ++i) {
        const double s = static_cast<double>(i) / g.nx;
        if (g.x_grading <= 0.0) {
            faces[i] = s;
        } else {
            // symmetric clustering at both walls
            const double half = s <= 0.5 ? 0.5 * cluster_left(2.0 * s, g.x_grading)
                                         : 1.0 - 0.5 * cluster_left(2.0 * (1.0 - s), g.x_grading);
            faces[i] = half;
        }
    }
    faces.front() = 0.0;
    faces.back() = 1.0;
    return faces;
}

std::vector<double> make_v_nodes(const GridSpec& g)
{
    if (g.nv < 4 || g.nv % 2 != 0) throw ParameterError("GridSpec: nv must be even and >= 4");
    if (!(g.vmax > 0.0)) throw ParameterError("GridSpec: vmax must be positive");
    std::vector<double> v(g.nv + 1);
    const int half = g.nv / 2;
    for (int j = 0; j <= half; ++j) {
        const double s = static_cast<double>(j) / half;
        const double r = g.vmax * cluster_left(s, g.v_grading);
        v[half + j] = r;
        v[half - j] = -r;
    }
    v[half] = 0.0;
    return v;
}

PhaseField make_field(const GridSpec& g)
{
    PhaseField p;
    const auto faces = make_x_faces(g);
    p.x.resize(g.nx);
    p.wx.resize(g.nx);
    for (int i = 0; i < g.nx; ++i) {
        p.x[i] = 0.5 * (faces[i] + faces[i + 1]);
        p.wx[i] = faces[i + 1] - faces[i];
    }
    p.v = make_v_nodes(g);
    p.wv = quad::trapezoid_weights(p.v);
    p.f.assign(p.x.size() * p.v.size(), 0.0);
    return p;
}

PhaseField make_box_field(double x0, double x1, int nx, double v0, double v1, int nv)
{
    if (nx < 2 || nv < 2 || !(x1 > x0) || !(v1 > v0))
        throw ParameterError("make_box_field: degenerate box");
    PhaseField p;
    p.x.resize(nx);
    p.v.resize(nv);
    for (int i = 0; i < nx; ++i) p.x[i] = x0 + (x1 - x0) * i / (nx - 1);
    for (int j = 0; j < nv; ++j) p.v[j] = v0 + (v1 - v0) * j / (nv - 1);
    p.wx = quad::trapezoid_weights(p.x);
    p.wv = quad::trapezoid_weights(p.v);
    p.f.assign(static_cast<std::size_t>(nx) * nv, 0.0);
    return p;
}

}  // namespace kfp
