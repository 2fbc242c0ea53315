#pragma once

#include <cmath>
#include <vector>

namespace sheat::quad {

/// Nodes and weights of a quadrature rule, ready for dot products.
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Composite Gauss–Legendre rule on [a, b]: `panels` equal panels of `order`
/// points each. Supported orders: 4, 8, 16.
Rule composite_gauss_legendre(double a, double b, int panels, int order = 16);

/// Composite rule on [a, b] with panel breaks at `breaks` (sorted, inside (a, b)).
Rule composite_gauss_legendre(double a, double b, const std::vector<double>& breaks,
                              int panels_per_piece, int order = 16);

template <class F>
double integrate(const Rule& rule, F&& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        s += rule.weights[i] * f(rule.nodes[i]);
    }
    return s;
}

template <class F>
double integrate(F&& f, double a, double b, int panels, int order = 16) {
    return integrate(composite_gauss_legendre(a, b, panels, order), f);
}

struct Refined {
    double value = 0.0;
    double error = 0.0;  // |I(2n) - I(n)| at the accepted level
    int panels = 0;
    bool converged = false;
};

/// Doubles the panel count until two consecutive levels agree to `tol`
/// (absolute) or `max_panels` is reached.
template <class F>
Refined integrate_refined(F&& f, double a, double b, double tol, int start_panels = 8,
                          int max_panels = 1 << 14, int order = 16) {
    Refined r;
    int n = start_panels;
    double prev = integrate(f, a, b, n, order);
    while (true) {
        const int next = 2 * n;
        const double cur = integrate(f, a, b, next, order);
        r.value = cur;
        r.error = std::abs(cur - prev);
        r.panels = next;
        if (r.error <= tol) {
            r.converged = true;
            return r;
        }
        if (next >= max_panels) return r;
        prev = cur;
        n = next;
    }
}

} // namespace sheat::quad
