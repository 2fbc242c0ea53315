#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "sheat/kernel.hpp"
#include "sheat/model.hpp"

namespace sheat {

/// Configuration of the deterministic second-moment solve for sigma(u) = k u.
///
/// With linear sigma the Ito isometry gives the exact renewal equation
///   m(t,x) = D1(t,x)^2 + lambda^2 k^2 int_0^t int_0^1 g(t-s,x,y)^2 m(s,y) dy ds,
/// D1 = int g(t,x,y) u0(y) dy, which is solved forward in time.
struct OracleConfig {
    InitialData u0;
    double nu = 0.5;
    double lambda = 1.0;
    double k_sigma = 1.0;
    Boundary boundary = Boundary::Dirichlet;

    std::vector<double> t_grid;   // output times, strictly increasing, starting at 0
    int n_interior = 63;          // x nodes (j + 1) / (n_interior + 1)

    int panels = 200;             // time panels over [0, t_grid.back()]
    bool auto_refine = true;      // resolve the start-up layer (length 40 / fit_rate) finely
    bool error_estimate = true;   // rerun at half the panels (and half the layer resolution)
    double history_tol = 1e-15;   // relative tail bound for dropping old time slices
    int n_modes = 512;            // eigenfunction modes for D1
    double fit_rate = std::numeric_limits<double>::quiet_NaN(); // NaN: lambda^4 k^4 / (8 nu)

    void validate() const;
};

/// Whole-line growth rate of the second moment, lambda^4 k^4 / (8 nu).
double whole_line_rate(double nu, double lambda, double k_sigma);

/// Second moment E[u(t,x)^2] on (t_grid x x_grid). Values are kept as log m
/// because large lambda overflows double; `m` holds exp(log_m) (possibly inf).
struct MomentField {
    std::vector<double> t;
    std::vector<double> x;
    std::vector<std::vector<double>> log_m; // [k][j]
    std::vector<std::vector<double>> m;     // [k][j]
    // |log m(N) - log m(N/2)|, empty when no estimate was requested.
    std::vector<std::vector<double>> log_error;
    // |m(N) - m(N/2)|, may be inf where m overflows.
    std::vector<std::vector<double>> error;
    double lambda = 0;
    double k_sigma = 1;
    double nu = 0.5;
    Boundary boundary = Boundary::Dirichlet;
    int panels = 0;        // time panels actually used
    double fit_rate = 0;   // exponential factored out of the product weights
    std::size_t max_history = 0; // longest history (in panels) used by any step

    bool has_error() const { return !log_error.empty(); }
    /// Linear interpolation in x of m(t_k, .) (nearest output time must match exactly).
    double at(double t, double x) const;
    double log_at(double t, double x) const;
    std::size_t time_index(double t) const;
};

/// Solves the renewal equation by product integration in time: on each panel
/// the factor exp(-r s) m(s, .) is linear in s and the
/// (t - s)^{-1/2} singularity of g(2(t-s),x,x) is integrated in closed form;
/// the spatial average of g^2 against hat functions is computed per lag.
/// Throws DomainError for a malformed t_grid or nonlinear configuration.
MomentField second_moment_volterra(const OracleConfig& config);

/// D1(t, x) = int g(t,x,y) u0(y) dy via the eigenfunction expansion.
double heat_solution(const InitialData& u0, double nu, Boundary boundary, double t, double x,
                     int n_modes = 512);

struct Envelope {
    std::vector<double> t;
    std::vector<double> log_h; // log min_{x in [gamma, 1-gamma]} m(t, x)
    std::vector<double> log_H; // log_h + rate * t
    std::vector<double> h;
    std::vector<double> H;
    std::vector<double> argmin_x;
    double rate = 0; // 2 nu pi^2
    double gamma = 0;
};

/// h(t) = min over x nodes in [gamma, 1 - gamma] of m(t, x) and
/// H(t) = exp(2 nu pi^2 t) h(t). DomainError when no node falls in the window.
Envelope lower_bound_envelope(const MomentField& mf, double gamma);

/// Per-lambda input to the growth calibration: log h on a common t grid.
struct GrowthSeries {
    double lambda = 0;
    std::vector<double> t;
    std::vector<double> log_h;
};

struct Theorem31Fit {
    std::vector<double> lambdas;
    std::vector<double> slopes;      // late-time slope r(lambda) of log h
    std::vector<double> slope_se;    // standard error of each slope
    double window_start = 0.5;       // fraction of the horizon dropped as transient
    double base_rate = 0;            // 2 nu pi^2 added back to r
    double kappa2 = 0;               // slope of r + base_rate against (lambda K_L)^4 through 0
    double kappa2_se = 0;
    double quadratic_coef = 0;       // same fit against (lambda K_L)^2
    double r2_quartic = 0;           // uncentered R^2 of the two through-origin fits
    double r2_quadratic = 0;
    double log_kappa1 = 0;           // mean intercept of log h - (kappa2 lambda^4 K_L^4 - base_rate) t
};

/// Fits r(lambda) on the last (1 - window_start) of each series, then
/// r + 2 nu pi^2 = kappa2 (lambda K_L)^4 by least squares through the origin.
/// Requires at least 4 lambda values (DomainError otherwise) and throws
/// NumericalError unless kappa2 > 0.
Theorem31Fit theorem31_calibration(const std::vector<GrowthSeries>& series, double k_lower,
                                   double nu = 0.5, double window_start = 0.5);

/// Late-time least-squares slope of (t, y) over t >= t0 + window_start (t1 - t0).
struct SlopeFit {
    double slope = 0;
    double intercept = 0;
    double slope_se = 0;
    std::size_t points = 0;
};
SlopeFit late_time_slope(const std::vector<double>& t, const std::vector<double>& y,
                         double window_start = 0.5);

/// Second moments of the semi-implicit finite-difference scheme itself
/// (linear sigma, Dirichlet): the covariance recursion
///   C <- A^{-1} (C + lambda^2 k^2 diag(C) dt / dx) A^{-T},  A = I - nu dt L,
/// started from u0 u0^T. Returns diag(C) at the requested steps; exact for the
/// discrete scheme, so it isolates Monte Carlo error from discretization bias.
std::vector<std::vector<double>> scheme_second_moment(const InitialData& u0, double nu,
                                                      double lambda, double k_sigma,
                                                      int n_interior, double dt,
                                                      const std::vector<long>& steps);

} // namespace sheat
