#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sheat/kernel.hpp"
#include "sheat/stats.hpp"

namespace sheat {

enum class Abscissa { Time, LogLambda };

/// Weighted straight-line fit y = intercept + slope * x.
///
/// Weights are 1 / se^2 when every point carries a positive finite standard
/// error, uniform otherwise. The slope covariance is scaled by the reduced
/// chi-square, and the interval uses Student t with n - 2 degrees of freedom.
struct RateFit {
    Abscissa abscissa = Abscissa::Time;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> y_se;
    std::vector<std::size_t> dropped; // input indices removed (non-finite or outside window)
    std::vector<std::string> flags;
    double window_lo = 0;
    double window_hi = 0;
    double slope = 0;
    double slope_se = 0;
    double slope_ci = 0; // half-width at the requested confidence
    double intercept = 0;
    double r_squared = 0;
    double confidence = 0.95;
    bool weighted = false;

    std::size_t n() const { return x.size(); }
    bool significantly_negative() const { return slope + slope_ci < 0.0; }
    bool significantly_positive() const { return slope - slope_ci > 0.0; }
};

/// Points with non-finite y or x outside [lo, hi] are dropped and flagged.
/// Fewer than 3 surviving points raise NumericalError.
RateFit fit_line(Abscissa kind, const std::vector<double>& x, const std::vector<double>& y,
                 const std::vector<double>& y_se, double lo, double hi, double confidence = 0.95);

/// Slope of log E[functional] against t over estimates with t in [lo, hi].
/// Per-point errors are log-scale interval half-widths / 1.96. All estimates
/// must share one functional (DomainError otherwise).
RateFit lyapunov_exponent(const std::vector<MomentEstimate>& series, double lo, double hi,
                          double confidence = 0.95);

/// Same fit for a deterministic log series (oracle output); se may be empty.
RateFit lyapunov_from_log(const std::vector<double>& t, const std::vector<double>& log_y,
                          const std::vector<double>& log_se, double lo, double hi,
                          double confidence = 0.95);

struct ExcitationFit {
    RateFit index;           // log log E_p against log lambda; slope is e_p
    double quartic_coef = 0; // log E_p = a + b lambda^4
    double quadratic_coef = 0;
    double r2_quartic = 0;   // centered R^2 of the two fits above
    double r2_quadratic = 0;
    std::vector<double> lambdas;
    std::vector<double> log_energy;
};

/// `log_energy[i]` = log E_p(t, lambda_i), `log_se[i]` its standard error (may be
/// empty). Needs a geometric lambda grid with >= 4 points (DomainError).
/// Points with E_p <= 1 are dropped and flagged.
ExcitationFit excitation_index(const std::vector<double>& lambdas,
                               const std::vector<double>& log_energy,
                               const std::vector<double>& log_se, double confidence = 0.95);

struct LambdaSlope {
    double lambda = 0;
    RateFit fit;
};

struct ThresholdResult {
    std::optional<double> lambda_lower; // largest lambda with significantly negative slope
    std::optional<double> lambda_upper; // smallest lambda with significantly positive slope
    bool ordered = true;                // lambda_lower <= lambda_upper when both exist
    bool one_sided = false;             // no sign change found in the grid
};

ThresholdResult threshold_scan(std::vector<LambdaSlope> slopes);

/// I(t, x) = int_0^t e^{beta s} s^{-alpha} int_0^1 g(s, x, y)^{2 - alpha} dy ds.
struct IntegralBoundSettings {
    double t_max = std::numeric_limits<double>::infinity(); // I is nondecreasing in t
    int x_points = 19;     // x = i / (x_points + 1); symmetric, so only x <= 1/2 is computed
    int s_panels = 24;     // log-spaced panels on [short_time, tail start]; half as many below
    int y_panels = 8;
    double short_time = 0.05; // below this s = u^{2/(1-alpha)} removes the singularity
};

struct IntegralBoundPoint {
    double alpha = 0;
    double beta = 0;
    double sup = 0;      // max over the x grid of I(t_max, x)
    double argmax_x = 0;
    double shape = 0;    // |beta|^{(alpha-1)/2} or beta^{(alpha-1)/2} + 1 / (threshold - beta)
    double constant = 0; // sup / shape
    double refined_sup = 0; // same at doubled s, y and x resolution
    double refinement_change = 0; // relative
};

struct IntegralBoundReport {
    double alpha = 0;
    double threshold = 0; // (2 - alpha) nu pi^2
    std::vector<IntegralBoundPoint> points;
    /// Log-log slopes between consecutive beta values: of sup against |beta|
    /// for beta < 0, of sup against (threshold - beta) otherwise.
    std::vector<double> local_exponents;
};

/// Dirichlet only. Past s where the second eigenmode is below 1e-14 of the
/// first, the inner integral is one-mode exact and the s tail is an incomplete
/// gamma function, so t_max may be infinite. beta must be nonzero and below
/// the threshold, alpha in (0, 1) (DomainError).
IntegralBoundReport verify_integral_bounds(double alpha, const std::vector<double>& betas,
                                           const KernelSpec& spec,
                                           const IntegralBoundSettings& settings = {});

/// I(t_max, x) for one (alpha, beta, x).
double integral_bound_value(double alpha, double beta, double x, const KernelSpec& spec,
                            const IntegralBoundSettings& settings = {});

} // namespace sheat
