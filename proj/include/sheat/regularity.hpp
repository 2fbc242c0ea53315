#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sheat/solver.hpp"

namespace sheat {

struct GrrParams {
    double p = 8.0;
    double delta = 1.0;
    double epsilon = 0.25;

    /// 8 (1 + 2 / (delta - epsilon)): the constant produced by integrating
    /// 8 int_0^d B^{1/p} u^{-2/p} d(u^{(2 + delta - epsilon)/p}) exactly.
    double kappa() const;
    /// 8 (1 + 1 / (delta - epsilon)), kept for reporting next to kappa().
    double kappa_printed() const;
    double exponent() const { return 2.0 + delta - epsilon; }   // denominator power in B
    double holder() const { return (delta - epsilon) / p; }     // modulus exponent

    /// p >= 1, delta > 0, 0 < epsilon < min(delta, 1) (DomainError otherwise).
    void validate() const;
};

/// Samples f(x0 + i h), i = 0..N, of a function on [x0, x0 + N h].
struct SampledFunction {
    double x0 = 0.0;
    double h = 0.0;
    std::vector<double> values;

    double length() const { return h * static_cast<double>(values.size() - 1); }
    /// Interior snapshot of a path with the boundary values appended
    /// (zeros for Dirichlet; interior nodes only for Neumann).
    static SampledFunction from_path(const SolutionPath& path, double t);
};

/// B = int int |f(x) - f(y)|^p / |x - y|^{2 + delta - epsilon} dx dy of the
/// piecewise-linear interpolant.
///
/// Reduced to lags: B = 2 int_0^L r^{-a} D(r) dr, D(r) = int |f(x + r) - f(x)|^p dx.
/// D is computed at lags r = k h (k >= 1); D(r) / r^p is taken linear between
/// lags and r^{p-a} is integrated exactly. Below the cutoff (one cell) there is
/// no sampled information; D(r) / r^p is continued linearly from the first two
/// lags, which is exact for linear f, to give the extrapolated value.
struct GrrFunctional {
    double value = 0;          // extrapolated to zero cutoff
    double at_cutoff = 0;      // pairs with |x - y| < h excluded
    double at_half_cutoff = 0; // pairs with |x - y| < h / 2 excluded
    double cutoff = 0;         // h
    double cutoff_sensitivity = 0; // |at_half_cutoff - at_cutoff| / value
    bool divergent = false;    // p + 1 <= 2 + delta - epsilon: the diagonal is not integrable
    std::string note;
};

/// Needs >= 64 samples (DomainError).
GrrFunctional grr_functional(const SampledFunction& f, const GrrParams& params);

struct HolderReport {
    double B = 0;
    double kappa = 0;
    double max_ratio = 0; // max over node pairs of |f_i - f_j| / (kappa B^{1/p} |x_i - x_j|^{holder})
    std::size_t pairs = 0;
    std::size_t violations = 0; // ratio > 1
};

/// Checks |f(x) - f(y)| <= kappa B^{1/p} |x - y|^{(delta - epsilon)/p} at all node pairs.
HolderReport holder_bound_check(const SampledFunction& f, const GrrParams& params, double B);

/// kappa B^{1/p} d^{(delta - epsilon)/p}.
double holder_bound(const GrrParams& params, double B, double d);

/// Even convex Young function Phi with Phi(0) = 0, and its inverse on [0, inf).
struct YoungFunction {
    std::function<double(double)> phi;
    std::function<double(double)> inverse; // empty: inverted numerically
    static YoungFunction power(double p);
};

/// Increasing modulus phi with phi(0) = 0; derivative optional.
struct Modulus {
    std::function<double(double)> value;
    std::function<double(double)> derivative; // empty: central differences
    static Modulus power(double a);
};

struct GrrBound {
    double value = 0;
    double error = 0;     // last accepted panel contribution
    int panels = 0;
    bool divergent = false;
};

/// 8 int_0^d Phi^{-1}(B / u^2) dphi(u), by u = d e^{-s} and Gauss-Legendre
/// panels in s until the panel contribution drops below rel_tol of the total.
GrrBound grr_general(const YoungFunction& Phi, const Modulus& phi, double B, double d,
                     double rel_tol = 1e-14, int max_panels = 4000);

} // namespace sheat
