#pragma once

#include <cstddef>
#include <vector>

namespace mtlab {

/// n-point Gauss-Legendre rule on [-1, 1]. Nodes ascending; cached per n.
struct GaussRule {
    std::vector<double> x;
    std::vector<double> w;
};
const GaussRule& gauss_legendre(std::size_t n);

/// Composite Gauss-Legendre on [a, b] with `panels` equal panels of `order` points.
template <class F>
double composite_gauss(F&& f, double a, double b, std::size_t panels, std::size_t order) {
    const GaussRule& g = gauss_legendre(order);
    const double h = (b - a) / static_cast<double>(panels);
    double sum = 0.0;
    for (std::size_t k = 0; k < panels; ++k) {
        const double lo = a + h * static_cast<double>(k);
        double s = 0.0;
        for (std::size_t q = 0; q < g.x.size(); ++q) s += g.w[q] * f(lo + 0.5 * h * (g.x[q] + 1.0));
        sum += 0.5 * h * s;
    }
    return sum;
}

}  // namespace mtlab
