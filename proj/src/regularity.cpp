#include "sheat/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/roots.hpp>

#include "sheat/errors.hpp"
#include "sheat/quadrature.hpp"

namespace sheat {

namespace {

/// int_lo^hi r^e (c0 + c1 r) dr.
double power_moment(double e, double lo, double hi, double c0, double c1) {
    auto prim = [](double k, double a, double b) {
        if (std::abs(k + 1.0) < 1e-12) return std::log(b / a);
        return (std::pow(b, k + 1.0) - std::pow(a, k + 1.0)) / (k + 1.0);
    };
    return c0 * prim(e, lo, hi) + c1 * prim(e + 1.0, lo, hi);
}

} // namespace

double GrrParams::kappa() const { return 8.0 * (1.0 + 2.0 / (delta - epsilon)); }
double GrrParams::kappa_printed() const { return 8.0 * (1.0 + 1.0 / (delta - epsilon)); }

void GrrParams::validate() const {
    if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError("GRR needs p >= 1");
    if (!(delta > 0.0)) throw DomainError("GRR needs delta > 0");
    if (!(epsilon > 0.0 && epsilon < std::min(delta, 1.0))) {
        throw DomainError("GRR needs 0 < epsilon < min(delta, 1)");
    }
}

SampledFunction SampledFunction::from_path(const SolutionPath& path, double t) {
    const auto u = path.at(t);
    SampledFunction f;
    f.h = path.grid.dx();
    if (path.boundary == Boundary::Dirichlet) {
        f.x0 = 0.0;
        f.values.reserve(u.size() + 2);
        f.values.push_back(0.0);
        f.values.insert(f.values.end(), u.begin(), u.end());
        f.values.push_back(0.0);
    } else {
        f.x0 = f.h;
        f.values.assign(u.begin(), u.end());
    }
    return f;
}

GrrFunctional grr_functional(const SampledFunction& f, const GrrParams& params) {
    params.validate();
    if (f.values.size() < 64) throw DomainError("GRR functional needs at least 64 samples");
    if (!(f.h > 0.0)) throw DomainError("sample spacing must be positive");
    const std::size_t n = f.values.size() - 1; // cells
    const double h = f.h;
    const double p = params.p;
    const double e = p - params.exponent(); // power of r multiplying D(r) / r^p

    // E[k] = D(k h) / (k h)^p by the trapezoid rule over x, exact for linear f.
    std::vector<double> E(n + 1, 0.0);
    for (std::size_t k = 1; k <= n; ++k) {
        const std::size_t m = n - k; // x nodes 0..m
        double s = 0.0;
        for (std::size_t i = 0; i <= m; ++i) {
            const double w = (i == 0 || i == m) ? 0.5 : 1.0;
            s += w * std::pow(std::abs(f.values[i + k] - f.values[i]), p);
        }
        if (m == 0) s = 0.0; // D(L) = 0: the x range is empty
        const double r = h * static_cast<double>(k);
        E[k] = h * s / std::pow(r, p);
    }

    double above = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        const double r0 = h * static_cast<double>(k);
        const double r1 = r0 + h;
        const double c1 = (E[k + 1] - E[k]) / h;
        const double c0 = E[k] - c1 * r0;
        above += power_moment(e, r0, r1, c0, c1);
    }
    above *= 2.0;

    GrrFunctional out;
    out.cutoff = h;
    out.at_cutoff = above;
    if (e <= -1.0) {
        out.divergent = true;
        out.value = std::numeric_limits<double>::infinity();
        out.at_half_cutoff = std::numeric_limits<double>::infinity();
        out.cutoff_sensitivity = std::numeric_limits<double>::infinity();
        out.note = "p + 1 <= 2 + delta - epsilon: near-diagonal contribution diverges";
        return out;
    }
    // Sub-cell part: D(r) / r^p continued linearly from the first two lags.
    const double c1 = (E[2] - E[1]) / h;
    const double c0 = E[1] - c1 * h;
    const double sub_half = 2.0 * power_moment(e, h / 2.0, h, c0, c1);
    const double sub_full = sub_half + 2.0 * power_moment(e, 0.0, h / 2.0, c0, c1);
    out.at_half_cutoff = above + sub_half;
    out.value = above + sub_full;
    out.cutoff_sensitivity = out.value > 0.0 ? std::abs(out.at_half_cutoff - out.at_cutoff) / out.value : 0.0;
    return out;
}

double holder_bound(const GrrParams& params, double B, double d) {
    params.validate();
    if (!(B >= 0.0)) throw DomainError("B must be nonnegative");
    return params.kappa() * std::pow(B, 1.0 / params.p) * std::pow(std::abs(d), params.holder());
}

HolderReport holder_bound_check(const SampledFunction& f, const GrrParams& params, double B) {
    params.validate();
    HolderReport r;
    r.B = B;
    r.kappa = params.kappa();
    const double scale = r.kappa * std::pow(B, 1.0 / params.p);
    const std::size_t n = f.values.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double diff = std::abs(f.values[j] - f.values[i]);
            const double bound = scale * std::pow(f.h * static_cast<double>(j - i), params.holder());
            double ratio = 0.0;
            if (diff > 0.0) ratio = bound > 0.0 ? diff / bound : std::numeric_limits<double>::infinity();
            r.max_ratio = std::max(r.max_ratio, ratio);
            if (ratio > 1.0) ++r.violations;
            ++r.pairs;
        }
    }
    return r;
}

YoungFunction YoungFunction::power(double p) {
    return {[p](double x) { return std::pow(std::abs(x), p); }, [p](double y) { return std::pow(y, 1.0 / p); }};
}

Modulus Modulus::power(double a) {
    return {[a](double u) { return std::pow(u, a); }, [a](double u) { return a * std::pow(u, a - 1.0); }};
}

namespace {

double invert(const YoungFunction& Phi, double y) {
    if (Phi.inverse) return Phi.inverse(y);
    if (y <= 0.0) return 0.0;
    double hi = 1.0;
    while (Phi.phi(hi) < y) {
        hi *= 2.0;
        if (!std::isfinite(hi)) throw NumericalError("Young function inverse did not bracket");
    }
    double lo = hi / 2.0;
    while (lo > 0.0 && Phi.phi(lo) > y) lo /= 2.0;
    std::uintmax_t iters = 200;
    const auto root = boost::math::tools::toms748_solve([&](double x) { return Phi.phi(x) - y; }, lo, hi,
                                                        boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (root.first + root.second);
}

double derivative(const Modulus& phi, double u) {
    if (phi.derivative) return phi.derivative(u);
    const double step = 1e-5 * u;
    return (phi.value(u + step) - phi.value(u - step)) / (2.0 * step);
}

} // namespace

GrrBound grr_general(const YoungFunction& Phi, const Modulus& phi, double B, double d, double rel_tol,
                     int max_panels) {
    if (!(B >= 0.0)) throw DomainError("B must be nonnegative");
    d = std::abs(d);
    GrrBound out;
    if (B == 0.0 || d == 0.0) return out;
    // u = d e^{-s}: dphi(u) = phi'(u) u ds, smooth and decaying in s for
    // integrable singularities at u = 0.
    auto integrand = [&](double s) {
        const double u = d * std::exp(-s);
        if (u == 0.0) return 0.0;
        return invert(Phi, B / (u * u)) * derivative(phi, u) * u;
    };
    const auto rule = quad::composite_gauss_legendre(0.0, 1.0, 1);
    double total = 0.0;
    double last = 0.0;
    int calm = 0;
    for (int k = 0; k < max_panels; ++k) {
        double panel = 0.0;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) panel += rule.weights[i] * integrand(k + rule.nodes[i]);
        if (!std::isfinite(panel)) {
            out.divergent = true;
            break;
        }
        total += panel;
        last = panel;
        out.panels = k + 1;
        calm = std::abs(panel) <= rel_tol * std::abs(total) ? calm + 1 : 0;
        if (calm >= 3) break;
    }
    out.value = 8.0 * total;
    out.error = 8.0 * std::abs(last);
    if (calm < 3) out.divergent = true;
    return out;
}

} // namespace sheat
