#pragma once

#include <vector>

namespace kfp {

// Values on a tensor grid of (x, v) nodes, stored row-major in x:
// f[i * nv + j] = f(x[i], v[j]).  wx and wv are the quadrature weights used
// for mass and flux sums.
struct PhaseField {
    std::vector<double> x, v;
    std::vector<double> wx, wv;
    std::vector<double> f;
    double t = 0.0;

    int nx() const { return static_cast<int>(x.size()); }
    int nv() const { return static_cast<int>(v.size()); }
    double& at(int i, int j) { return f[static_cast<std::size_t>(i) * v.size() + j]; }
    double at(int i, int j) const { return f[static_cast<std::size_t>(i) * v.size() + j]; }

    double mass() const;
    double sup() const;
    // Bilinear interpolation; zero outside the node hull.
    double interpolate(double xq, double vq) const;
    // Index of the node closest to v = 0, or -1 if no node sits at zero.
    int zero_velocity_index() const;
};

// Grid description for the bounded problem on [0,1] x [-L, L].
// x nodes are cell centres (walls sit on cell faces); v nodes include +-L,
// where the solution is held at zero, and v = 0 when nv_intervals is even.
struct GridSpec {
    int nx = 128;
    int nv = 256;           // number of v intervals
    double vmax = 8.0;      // truncation L
    double x_grading = 0.0; // 0: uniform; > 0: cells cluster geometrically at both walls
    double v_grading = 0.0; // 0: uniform; > 0: nodes cluster at v = 0
};

// Cell faces in x for the given spec (size nx + 1, from 0 to 1).
std::vector<double> make_x_faces(const GridSpec& g);
std::vector<double> make_v_nodes(const GridSpec& g);
PhaseField make_field(const GridSpec& g);

// Uniform nodal grid on a rectangle with trapezoid weights (free-space use).
PhaseField make_box_field(double x0, double x1, int nx, double v0, double v1, int nv);

}  // namespace kfp
