#include "sheat/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sheat/errors.hpp"
#include "sheat/quadrature.hpp"

namespace sheat {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxSeriesTerms = 10'000'000;
constexpr int kMaxImages = 100'000;

double series_tail(double a, int n) {
    const double np1 = n + 1.0;
    return 2.0 * std::exp(-a * np1 * np1) / (-std::expm1(-a * (2.0 * n + 3.0)));
}

int terms_for(double a, double tol) {
    // Start from the leading-order estimate and walk to the exact minimum.
    int n = std::max(1, static_cast<int>(std::ceil(std::sqrt(std::log(2.0 / tol) / a))) - 2);
    while (n > 1 && series_tail(a, n - 1) <= tol) --n;
    while (series_tail(a, n) > tol && n < kMaxSeriesTerms) ++n;
    return n;
}

void check_positions(const KernelSpec& spec, double x, double y) {
    if (spec.boundary == Boundary::Free) return;
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
        throw DomainError("kernel positions must lie in [0, 1]");
    }
}

void check_time(double t) {
    if (!(t > 0.0)) throw DomainError("kernel time must be positive");
}

// Number of image pairs K and the bound on everything beyond |k| > K.
std::pair<int, double> image_count(double nu, double t, double tol) {
    const double four_nu_t = 4.0 * nu * t;
    int k = 2;
    for (; k < kMaxImages; ++k) {
        const double ratio = std::exp(-(8.0 * k + 4.0) / four_nu_t);
        const double bound = 4.0 * free_kernel(nu, t, 2.0 * k) / (1.0 - ratio);
        if (bound <= 0.01 * tol || !(ratio < 1.0)) {
            return {k, bound};
        }
    }
    return {k, 4.0 * free_kernel(nu, t, 2.0 * k)};
}

double images_sum(const KernelSpec& spec, double t, double x, double y, int k_max) {
    const double sign = spec.boundary == Boundary::Neumann ? 1.0 : -1.0;
    // Accumulate from the outermost images inward to keep round-off small.
    double s = 0.0;
    for (int k = k_max; k >= 1; --k) {
        for (int kk : {k, -k}) {
            s += free_kernel(spec.nu, t, x - y + 2.0 * kk) +
                 sign * free_kernel(spec.nu, t, x + y + 2.0 * kk);
        }
    }
    s += free_kernel(spec.nu, t, x - y) + sign * free_kernel(spec.nu, t, x + y);
    return s;
}

double images_dx(const KernelSpec& spec, double t, double x, double y, int k_max) {
    const double sign = spec.boundary == Boundary::Neumann ? 1.0 : -1.0;
    const double c = -1.0 / (2.0 * spec.nu * t);
    auto d = [&](double z) { return c * z * free_kernel(spec.nu, t, z); };
    double s = 0.0;
    for (int k = k_max; k >= 1; --k) {
        for (int kk : {k, -k}) {
            s += d(x - y + 2.0 * kk) + sign * d(x + y + 2.0 * kk);
        }
    }
    s += d(x - y) + sign * d(x + y);
    return s;
}

double image_threshold_for(const KernelSpec& spec) {
    // Smallest t at which kSeriesTermCap terms certify tol; bisection in log t.
    double lo = 1e-12;
    double hi = 1e3;
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        const double a = spec.nu * kPi * kPi * mid;
        if (series_tail(a, kSeriesTermCap) <= spec.tol) {
            hi = mid;
        } else {
            lo = mid;
        }
        if (hi / lo < 1.0 + 1e-12) break;
    }
    return hi;
}

} // namespace

const char* to_string(Boundary b) {
    switch (b) {
    case Boundary::Dirichlet: return "dirichlet";
    case Boundary::Neumann: return "neumann";
    case Boundary::Free: return "free";
    }
    return "?";
}

Boundary boundary_from_string(const std::string& s) {
    if (s == "dirichlet") return Boundary::Dirichlet;
    if (s == "neumann") return Boundary::Neumann;
    if (s == "free") return Boundary::Free;
    throw DomainError("unknown boundary '" + s + "'");
}

void KernelSpec::validate() const {
    if (!(nu > 0.0)) throw DomainError("kernel diffusivity nu must be positive");
    if (!(tol > 0.0)) throw DomainError("kernel tolerance must be positive");
}

double free_kernel(double nu, double t, double z) {
    const double four_nu_t = 4.0 * nu * t;
    return std::exp(-z * z / four_nu_t) / std::sqrt(kPi * four_nu_t);
}

Truncation truncation_terms(const KernelSpec& spec, double t) {
    spec.validate();
    check_time(t);
    Truncation tr;
    tr.image_threshold = image_threshold_for(spec);
    const double a = spec.nu * kPi * kPi * t;
    tr.n_terms = terms_for(a, spec.tol);
    tr.tail_bound = series_tail(a, tr.n_terms);
    tr.use_images = tr.n_terms > kSeriesTermCap;
    return tr;
}

double eval_series(const KernelSpec& spec, double t, double x, double y, int n_terms) {
    spec.validate();
    check_time(t);
    check_positions(spec, x, y);
    if (spec.boundary == Boundary::Free) return free_kernel(spec.nu, t, x - y);
    const double a = spec.nu * kPi * kPi * t;
    double s = 0.0;
    // Smallest terms first.
    for (int n = n_terms; n >= 1; --n) {
        const double e = std::exp(-a * n * static_cast<double>(n));
        if (spec.boundary == Boundary::Dirichlet) {
            s += e * std::sin(n * kPi * x) * std::sin(n * kPi * y);
        } else {
            s += e * std::cos(n * kPi * x) * std::cos(n * kPi * y);
        }
    }
    return spec.boundary == Boundary::Neumann ? 1.0 + 2.0 * s : 2.0 * s;
}

double eval_images(const KernelSpec& spec, double t, double x, double y) {
    spec.validate();
    check_time(t);
    check_positions(spec, x, y);
    if (spec.boundary == Boundary::Free) return free_kernel(spec.nu, t, x - y);
    const auto [k, bound] = image_count(spec.nu, t, spec.tol);
    (void)bound;
    return images_sum(spec, t, x, y, k);
}

double log_eval_kernel(const KernelSpec& spec, double t, double x, double y) {
    const auto ev = eval_kernel_detailed(spec, t, x, y);
    if (ev.value > 1e-200) return std::log(ev.value);
    if (spec.boundary == Boundary::Free) {
        const double z = x - y;
        return -z * z / (4.0 * spec.nu * t) - 0.5 * std::log(4.0 * kPi * spec.nu * t);
    }
    // Factor out the nearest image exp(-(x-y)^2 / 4 nu t); the remaining
    // images are relative corrections exp(-(z_k^2 - z_0^2) / 4 nu t).
    const double four_nu_t = 4.0 * spec.nu * t;
    const double z0 = x - y;
    const double sign = spec.boundary == Boundary::Neumann ? 1.0 : -1.0;
    const auto [k_max, bound] = image_count(spec.nu, t, spec.tol);
    (void)bound;
    double rel = 0.0;
    for (int k = k_max; k >= -k_max; --k) {
        const double zm = x - y + 2.0 * k;
        const double zp = x + y + 2.0 * k;
        if (k != 0) rel += std::exp(-(zm * zm - z0 * z0) / four_nu_t);
        rel += sign * std::exp(-(zp * zp - z0 * z0) / four_nu_t);
    }
    if (!(1.0 + rel > 0.0)) return -std::numeric_limits<double>::infinity();
    return -z0 * z0 / four_nu_t - 0.5 * std::log(kPi * four_nu_t) + std::log1p(rel);
}

KernelEval eval_kernel_detailed(const KernelSpec& spec, double t, double x, double y) {
    spec.validate();
    check_time(t);
    check_positions(spec, x, y);
    KernelEval ev;
    if (spec.boundary == Boundary::Free) {
        ev.value = free_kernel(spec.nu, t, x - y);
        return ev;
    }
    const double a = spec.nu * kPi * kPi * t;
    // The leading-order term count is within a few terms of the exact one;
    // far past the cap the walk in terms_for is skipped.
    const bool far_past_cap = std::log(2.0 / spec.tol) / a > 4.0 * kSeriesTermCap * kSeriesTermCap;
    const int n = far_past_cap ? kSeriesTermCap + 1 : terms_for(a, spec.tol);
    if (n <= kSeriesTermCap) {
        ev.value = eval_series(spec, t, x, y, n);
        ev.error_bound = series_tail(a, n);
        ev.n_terms = n;
        return ev;
    }
    const auto [k, bound] = image_count(spec.nu, t, spec.tol);
    ev.value = images_sum(spec, t, x, y, k);
    ev.error_bound = bound;
    ev.n_terms = k;
    ev.images = true;
    return ev;
}

double eval_kernel(const KernelSpec& spec, double t, double x, double y) {
    return eval_kernel_detailed(spec, t, x, y).value;
}

double dirichlet_k3(double nu) { return 2.0 / (-std::expm1(-3.0 * nu * kPi * kPi)); }

UpperBounds kernel_upper_bounds(const KernelSpec& spec, double t, double x, double y) {
    spec.validate();
    check_time(t);
    if (spec.boundary != Boundary::Dirichlet) {
        throw DomainError("kernel upper bounds are stated for the Dirichlet kernel");
    }
    UpperBounds ub;
    ub.free_bound = free_kernel(spec.nu, t, x - y);
    const double rate = spec.nu * kPi * kPi;
    ub.k3 = t >= 1.0 ? dirichlet_k3(spec.nu) : 2.0 / (-std::expm1(-3.0 * rate * t));
    ub.longtime_bound = ub.k3 * std::exp(-rate * t);
    return ub;
}

void LowerBoundSpec::validate() const {
    if (!(gamma > 0.0 && gamma < 0.25)) throw DomainError("gamma must lie in (0, 1/4)");
    if (!(kappa1 > 0.0 && kappa2 > 0.0)) throw DomainError("kappa1 and kappa2 must be positive");
}

namespace {

double lower_shape(double nu, double gamma, double kappa2, double t, double x, double y) {
    const double d = x - y;
    const double small_t = t <= gamma * gamma ? 1.0 / std::sqrt(t) : 1.0;
    return std::exp(-nu * kPi * kPi * t) * std::exp(-kappa2 * d * d / t) * small_t;
}

double log_lower_shape(double nu, double gamma, double kappa2, double t, double x, double y) {
    const double d = x - y;
    const double small_t = t <= gamma * gamma ? -0.5 * std::log(t) : 0.0;
    return -nu * kPi * kPi * t - kappa2 * d * d / t + small_t;
}

} // namespace

double kernel_lower_bound(const LowerBoundSpec& lb, const KernelSpec& spec, double t, double x,
                          double y) {
    lb.validate();
    spec.validate();
    check_time(t);
    const double lo = lb.gamma;
    const double hi = 1.0 - lb.gamma;
    if (!(x >= lo && x <= hi && y >= lo && y <= hi)) {
        throw DomainError("lower bound positions must lie in [gamma, 1 - gamma]");
    }
    return lb.kappa1 * lower_shape(spec.nu, lb.gamma, lb.kappa2, t, x, y);
}

LowerBoundCalibration calibrate_lower_bound(const KernelSpec& spec, double gamma,
                                            std::span<const double> ts,
                                            std::span<const double> xs) {
    spec.validate();
    if (!(gamma > 0.0 && gamma < 0.25)) throw DomainError("gamma must lie in (0, 1/4)");
    for (double x : xs) {
        if (x < gamma || x > 1.0 - gamma) {
            throw DomainError("calibration positions must lie in [gamma, 1 - gamma]");
        }
    }
    struct Node {
        double t, x, y, log_g;
    };
    std::vector<Node> nodes;
    nodes.reserve(ts.size() * xs.size() * xs.size());
    for (double t : ts) {
        for (double x : xs) {
            for (double y : xs) nodes.push_back({t, x, y, log_eval_kernel(spec, t, x, y)});
        }
    }
    const double dmax = 1.0 - 2.0 * gamma;
    LowerBoundCalibration best;
    best.nodes = nodes.size();
    double best_score = -std::numeric_limits<double>::infinity();
    for (double k2 = 0.02; k2 <= 200.0; k2 *= 1.1) {
        double log_k1 = std::numeric_limits<double>::infinity();
        for (const auto& n : nodes) {
            log_k1 = std::min(log_k1, n.log_g - log_lower_shape(spec.nu, gamma, k2, n.t, n.x, n.y));
        }
        const double score = log_k1 - k2 * dmax * dmax / (gamma * gamma);
        if (std::isfinite(log_k1) && std::exp(log_k1) > 0.0 && score > best_score) {
            best_score = score;
            best.kappa1 = std::exp(log_k1) * (1.0 - 1e-12);
            best.kappa2 = k2;
        }
    }
    if (!(best.kappa1 > 0.0)) throw NumericalError("lower-bound calibration found no positive pair");
    double log_min = std::numeric_limits<double>::infinity();
    for (const auto& n : nodes) {
        log_min = std::min(log_min, n.log_g - std::log(best.kappa1) -
                                        log_lower_shape(spec.nu, gamma, best.kappa2, n.t, n.x, n.y));
    }
    best.min_ratio = std::exp(log_min);
    return best;
}

double kernel_dx(const KernelSpec& spec, double t, double x, double y) {
    spec.validate();
    check_time(t);
    check_positions(spec, x, y);
    if (spec.boundary == Boundary::Free) {
        const double z = x - y;
        return -z / (2.0 * spec.nu * t) * free_kernel(spec.nu, t, z);
    }
    const double a = spec.nu * kPi * kPi * t;
    // sum_{n>N} n e^{-a n^2} <= e^{-a N^2} / (2a) once N >= 1/sqrt(2a).
    int n = std::max(1, static_cast<int>(std::ceil(1.0 / std::sqrt(2.0 * a))));
    while (kPi * std::exp(-a * n * static_cast<double>(n)) / a > spec.tol && n < kMaxSeriesTerms) {
        ++n;
    }
    constexpr int kDxSeriesCap = 4096;
    if (n > kDxSeriesCap) {
        const auto [k, bound] = image_count(spec.nu, t, spec.tol * t);
        (void)bound;
        return images_dx(spec, t, x, y, k + 1);
    }
    double s = 0.0;
    for (int m = n; m >= 1; --m) {
        const double e = std::exp(-a * m * static_cast<double>(m)) * m * kPi;
        if (spec.boundary == Boundary::Dirichlet) {
            s += e * std::cos(m * kPi * x) * std::sin(m * kPi * y);
        } else {
            s -= e * std::sin(m * kPi * x) * std::cos(m * kPi * y);
        }
    }
    return 2.0 * s;
}

DxBoundReport kernel_dx_bound_check(const KernelSpec& spec, std::span<const double> ts,
                                    std::span<const double> xs) {
    if (spec.boundary != Boundary::Dirichlet) {
        throw DomainError("derivative bound check expects the Dirichlet kernel");
    }
    struct Node {
        double t, d2, dx;
    };
    std::vector<Node> nodes;
    DxBoundReport rep;
    for (double t : ts) {
        for (double x : xs) {
            for (double y : xs) {
                const double v = kernel_dx(spec, t, x, y);
                if (!std::isfinite(v)) rep.finite = false;
                rep.max_abs_dx = std::max(rep.max_abs_dx, std::abs(v));
                nodes.push_back({t, (x - y) * (x - y), std::abs(v)});
            }
        }
    }
    rep.nodes = nodes.size();
    auto k1_for = [&](double k2) {
        double k1 = 0.0;
        for (const auto& n : nodes) k1 = std::max(k1, n.dx * n.t * std::exp(k2 * n.d2 / n.t));
        return k1;
    };
    const double k1_zero = k1_for(0.0);
    const double k2_max = 1.0 / (4.0 * spec.nu);
    rep.k1 = k1_zero;
    rep.k2 = 0.0;
    for (int i = 1; i < 20; ++i) {
        const double k2 = k2_max * i / 20.0;
        const double k1 = k1_for(k2);
        if (!(k1 <= 2.0 * k1_zero)) break;
        rep.k1 = k1;
        rep.k2 = k2;
    }
    if (!std::isfinite(rep.k1)) rep.finite = false;
    return rep;
}

double semigroup_residual(const KernelSpec& spec, double s, double t, double x, double z,
                          int panels) {
    check_time(s);
    check_time(t);
    const auto rule = quad::composite_gauss_legendre(0.0, 1.0, panels, 16);
    const double lhs = quad::integrate(
        rule, [&](double y) { return eval_kernel(spec, s, x, y) * eval_kernel(spec, t, y, z); });
    return std::abs(lhs - eval_kernel(spec, s + t, x, z));
}

double squared_kernel_residual(const KernelSpec& spec, double s, double y0, int panels) {
    check_time(s);
    const auto rule = quad::composite_gauss_legendre(0.0, 1.0, panels, 16);
    const double lhs = quad::integrate(rule, [&](double y) {
        const double g = eval_kernel(spec, s, y0, y);
        return g * g;
    });
    return std::abs(lhs - eval_kernel(spec, 2.0 * s, y0, y0));
}

double free_convolution_residual(double nu, double s, double t, double x, double z) {
    check_time(s);
    check_time(t);
    // g(s,x,y) g(t,y,z) = g(s+t,x,z) * N(y; mean, var) with
    // var = 2 nu s t / (s + t); the Gaussian in y integrates to one.
    const double vs = 2.0 * nu * s;
    const double vt = 2.0 * nu * t;
    const double var_sum = vs + vt;
    const double prefactor =
        std::exp(-(x - z) * (x - z) / (2.0 * var_sum)) / std::sqrt(2.0 * kPi * var_sum);
    return std::abs(prefactor - free_kernel(nu, s + t, x - z));
}

double kernel_mass(const KernelSpec& spec, double t, double x, int panels) {
    const auto rule = quad::composite_gauss_legendre(0.0, 1.0, panels, 16);
    return quad::integrate(rule, [&](double y) { return eval_kernel(spec, t, x, y); });
}

} // namespace sheat
