#include "sheat/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include "sheat/errors.hpp"

namespace sheat::quad {
namespace {

template <unsigned N>
void append_panel(double a, double b, Rule& rule) {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    // Even orders: boost stores the positive half of a symmetric rule.
    for (std::size_t k = 0; k < x.size(); ++k) {
        rule.nodes.push_back(mid - half * x[k]);
        rule.weights.push_back(half * w[k]);
        rule.nodes.push_back(mid + half * x[k]);
        rule.weights.push_back(half * w[k]);
    }
}

void append(double a, double b, int order, Rule& rule) {
    switch (order) {
    case 4: append_panel<4>(a, b, rule); break;
    case 8: append_panel<8>(a, b, rule); break;
    case 16: append_panel<16>(a, b, rule); break;
    default: throw DomainError("unsupported Gauss-Legendre order " + std::to_string(order));
    }
}

} // namespace

Rule composite_gauss_legendre(double a, double b, int panels, int order) {
    if (panels < 1) throw DomainError("panel count must be positive");
    Rule rule;
    rule.nodes.reserve(static_cast<std::size_t>(panels * order));
    rule.weights.reserve(static_cast<std::size_t>(panels * order));
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        const double hi = (p + 1 == panels) ? b : a + (p + 1) * h;
        append(lo, hi, order, rule);
    }
    return rule;
}

Rule composite_gauss_legendre(double a, double b, const std::vector<double>& breaks,
                              int panels_per_piece, int order) {
    Rule rule;
    double lo = a;
    auto piece = [&](double hi) {
        if (hi <= lo) return;
        const double h = (hi - lo) / panels_per_piece;
        for (int p = 0; p < panels_per_piece; ++p) {
            append(lo + p * h, (p + 1 == panels_per_piece) ? hi : lo + (p + 1) * h, order, rule);
        }
        lo = hi;
    };
    for (double br : breaks) {
        if (br > a && br < b) piece(br);
    }
    piece(b);
    return rule;
}

} // namespace sheat::quad
