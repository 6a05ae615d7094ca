#include "kfp/quadrature.hpp"

namespace kfp::quad {

std::vector<double> trapezoid_weights(const std::vector<double>& nodes)
{
    const std::size_t n = nodes.size();
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = 0.5 * (nodes[i + 1] - nodes[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    return w;
}

}  // namespace kfp::quad
