#include "sheat/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "sheat/errors.hpp"
#include "sheat/quadrature.hpp"

namespace sheat {

namespace {

constexpr double kPi = std::numbers::pi;

double student_quantile(double confidence, double dof) {
    boost::math::students_t dist(dof);
    return boost::math::quantile(dist, 0.5 + 0.5 * confidence);
}

struct LineCoef {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
};

LineCoef plain_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineCoef c;
    c.slope = sxx > 0 ? sxy / sxx : 0.0;
    c.intercept = my - c.slope * mx;
    c.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return c;
}

} // namespace

RateFit fit_line(Abscissa kind, const std::vector<double>& x, const std::vector<double>& y,
                 const std::vector<double>& y_se, double lo, double hi, double confidence) {
    if (x.size() != y.size() || (!y_se.empty() && y_se.size() != y.size())) {
        throw DomainError("fit inputs have mismatched lengths");
    }
    if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("confidence must be in (0, 1)");
    RateFit f;
    f.abscissa = kind;
    f.window_lo = lo;
    f.window_hi = hi;
    f.confidence = confidence;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] >= lo && x[i] <= hi)) {
            f.dropped.push_back(i);
            continue;
        }
        if (!std::isfinite(y[i]) || !std::isfinite(x[i])) {
            f.dropped.push_back(i);
            f.flags.push_back("non-finite value dropped at x = " + std::to_string(x[i]));
            continue;
        }
        f.x.push_back(x[i]);
        f.y.push_back(y[i]);
        f.y_se.push_back(y_se.empty() ? 0.0 : y_se[i]);
    }
    const std::size_t n = f.x.size();
    if (n < 3) throw NumericalError("fit needs at least 3 points in the window");

    f.weighted = std::all_of(f.y_se.begin(), f.y_se.end(), [](double s) { return s > 0.0 && std::isfinite(s); });
    std::vector<double> w(n, 1.0);
    if (f.weighted) {
        for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (f.y_se[i] * f.y_se[i]);
    }
    const double sw = std::accumulate(w.begin(), w.end(), 0.0);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += w[i] * f.x[i];
        my += w[i] * f.y[i];
    }
    mx /= sw;
    my /= sw;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += w[i] * (f.x[i] - mx) * (f.x[i] - mx);
        sxy += w[i] * (f.x[i] - mx) * (f.y[i] - my);
        syy += w[i] * (f.y[i] - my) * (f.y[i] - my);
    }
    if (!(sxx > 0.0)) throw NumericalError("degenerate abscissa: all points coincide");
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ssr = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = f.y[i] - f.intercept - f.slope * f.x[i];
        ssr += w[i] * r * r;
    }
    f.r_squared = syy > 0 ? 1.0 - ssr / syy : 1.0;
    const double dof = static_cast<double>(n) - 2.0;
    f.slope_se = std::sqrt(ssr / dof / sxx);
    f.slope_ci = student_quantile(confidence, dof) * f.slope_se;
    return f;
}

RateFit lyapunov_exponent(const std::vector<MomentEstimate>& series, double lo, double hi,
                          double confidence) {
    if (series.empty()) throw DomainError("empty moment series");
    std::vector<double> t, y, se;
    for (const auto& e : series) {
        if (!(e.functional() == series.front().functional())) {
            throw DomainError("moment series mixes functionals");
        }
        t.push_back(e.t());
        y.push_back(e.n() > 0 ? e.log_mean() : std::numeric_limits<double>::quiet_NaN());
        se.push_back(e.n() >= 2 ? e.log_ci_half_width() / 1.96 : 0.0);
    }
    return fit_line(Abscissa::Time, t, y, se, lo, hi, confidence);
}

RateFit lyapunov_from_log(const std::vector<double>& t, const std::vector<double>& log_y,
                          const std::vector<double>& log_se, double lo, double hi,
                          double confidence) {
    return fit_line(Abscissa::Time, t, log_y, log_se, lo, hi, confidence);
}

ExcitationFit excitation_index(const std::vector<double>& lambdas,
                               const std::vector<double>& log_energy,
                               const std::vector<double>& log_se, double confidence) {
    if (lambdas.size() != log_energy.size() || (!log_se.empty() && log_se.size() != lambdas.size())) {
        throw DomainError("excitation inputs have mismatched lengths");
    }
    if (lambdas.size() < 4) throw DomainError("excitation index needs at least 4 lambda values");
    for (double l : lambdas) {
        if (!(l > 0.0)) throw DomainError("lambda grid must be positive");
    }
    const double ratio = lambdas[1] / lambdas[0];
    if (!(ratio > 1.0)) throw DomainError("lambda grid must be increasing");
    for (std::size_t i = 1; i < lambdas.size(); ++i) {
        if (std::abs(lambdas[i] / lambdas[i - 1] - ratio) > 1e-6 * ratio) {
            throw DomainError("lambda grid must be geometric");
        }
    }

    ExcitationFit out;
    out.lambdas = lambdas;
    out.log_energy = log_energy;
    std::vector<double> lx, ly, lse;
    std::vector<std::string> flags;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        lx.push_back(std::log(lambdas[i]));
        if (log_energy[i] > 0.0 && std::isfinite(log_energy[i])) {
            ly.push_back(std::log(log_energy[i]));
            lse.push_back(log_se.empty() ? 0.0 : log_se[i] / log_energy[i]);
        } else {
            ly.push_back(std::numeric_limits<double>::quiet_NaN());
            lse.push_back(0.0);
            flags.push_back("E_p <= 1 at lambda = " + std::to_string(lambdas[i]));
        }
    }
    out.index = fit_line(Abscissa::LogLambda, lx, ly, lse, -std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity(), confidence);
    out.index.flags = flags; // every non-finite point here is an E_p <= 1 drop

    std::vector<double> q4, q2, e;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!std::isfinite(log_energy[i])) continue;
        q4.push_back(std::pow(lambdas[i], 4));
        q2.push_back(lambdas[i] * lambdas[i]);
        e.push_back(log_energy[i]);
    }
    const auto c4 = plain_line(q4, e);
    const auto c2 = plain_line(q2, e);
    out.quartic_coef = c4.slope;
    out.quadratic_coef = c2.slope;
    out.r2_quartic = c4.r2;
    out.r2_quadratic = c2.r2;
    return out;
}

ThresholdResult threshold_scan(std::vector<LambdaSlope> slopes) {
    std::sort(slopes.begin(), slopes.end(),
              [](const LambdaSlope& a, const LambdaSlope& b) { return a.lambda < b.lambda; });
    ThresholdResult r;
    for (const auto& s : slopes) {
        if (s.fit.significantly_negative()) r.lambda_lower = s.lambda;
    }
    for (auto it = slopes.rbegin(); it != slopes.rend(); ++it) {
        if (it->fit.significantly_positive()) r.lambda_upper = it->lambda;
    }
    r.one_sided = !(r.lambda_lower && r.lambda_upper);
    r.ordered = r.one_sided || *r.lambda_lower <= *r.lambda_upper;
    return r;
}

namespace {

/// Quadrature in s with the inner y integral folded in, for one x:
/// I(beta) = sum_i w_i exp(beta s_i + log_j_i) + tail(beta).
struct STable {
    std::vector<double> s;
    std::vector<double> log_w; // log of weight * s^{-alpha} * J(s, x)
    double tail_start = 0;
    double tail_log_coef = 0; // log of (2 sin(pi x))^{2-alpha} S_alpha
};

double inner_integral(const KernelSpec& spec, double alpha, double s, double x, int y_panels) {
    const double sigma = std::sqrt(2.0 * spec.nu * s);
    const double lo = std::max(0.0, x - 12.0 * sigma);
    const double hi = std::min(1.0, x + 12.0 * sigma);
    return quad::integrate(
        [&](double y) { return std::pow(std::max(0.0, eval_kernel(spec, s, x, y)), 2.0 - alpha); }, lo, hi,
        y_panels);
}

STable build_table(const KernelSpec& spec, double alpha, double x, const IntegralBoundSettings& st) {
    STable tab;
    const double lambda1 = spec.nu * kPi * kPi;
    tab.tail_start = std::max(st.short_time * 2.0, std::log(1e14) / (3.0 * lambda1));
    const double t_max = st.t_max;

    auto push = [&](double s, double w) {
        const double j = inner_integral(spec, alpha, s, x, st.y_panels);
        if (!(j > 0.0) || !(w > 0.0)) return;
        tab.s.push_back(s);
        tab.log_w.push_back(std::log(w) - alpha * std::log(s) + std::log(j));
    };

    // Short times: s = u^q makes s^{-(1 + alpha)/2} ds smooth in u.
    const double q = 2.0 / (1.0 - alpha);
    const double s1 = std::min(st.short_time, t_max);
    const auto short_rule =
        quad::composite_gauss_legendre(0.0, std::pow(s1, 1.0 / q), std::max(2, st.s_panels / 2));
    for (std::size_t i = 0; i < short_rule.nodes.size(); ++i) {
        const double u = short_rule.nodes[i];
        push(std::pow(u, q), short_rule.weights[i] * q * std::pow(u, q - 1.0));
    }
    // Intermediate times on log-spaced panels.
    const double s2 = std::min(tab.tail_start, t_max);
    if (s2 > s1) {
        std::vector<double> breaks;
        for (int k = 1; k < st.s_panels; ++k) {
            breaks.push_back(s1 * std::pow(s2 / s1, static_cast<double>(k) / st.s_panels));
        }
        const auto mid = quad::composite_gauss_legendre(s1, s2, breaks, 1);
        for (std::size_t i = 0; i < mid.nodes.size(); ++i) push(mid.nodes[i], mid.weights[i]);
    }
    const double a = 2.0 - alpha;
    // int_0^1 sin(pi y)^a dy.
    const double s_alpha = std::tgamma((a + 1.0) / 2.0) / (std::sqrt(kPi) * std::tgamma(a / 2.0 + 1.0));
    tab.tail_log_coef = a * std::log(2.0 * std::sin(kPi * x)) + std::log(s_alpha);
    return tab;
}

double evaluate_table(const STable& tab, double alpha, double beta, double threshold, double t_max) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tab.s.size(); ++i) hi = std::max(hi, beta * tab.s[i] + tab.log_w[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < tab.s.size(); ++i) sum += std::exp(beta * tab.s[i] + tab.log_w[i] - hi);
    double value = std::exp(hi) * sum;
    if (t_max > tab.tail_start) {
        // int_{a}^{b} s^{-alpha} e^{-g s} ds = g^{alpha - 1} [Gamma(1 - alpha, g a) - Gamma(1 - alpha, g b)].
        const double g = threshold - beta;
        const double upper_a = boost::math::tgamma(1.0 - alpha, g * tab.tail_start);
        const double upper_b = std::isfinite(t_max) ? boost::math::tgamma(1.0 - alpha, g * t_max) : 0.0;
        value += std::exp(tab.tail_log_coef + (alpha - 1.0) * std::log(g)) * (upper_a - upper_b);
    }
    return value;
}

void check_bound_args(double alpha, double beta, double threshold, const KernelSpec& spec) {
    if (spec.boundary != Boundary::Dirichlet) throw DomainError("integral bounds are stated for the Dirichlet kernel");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
    if (!(beta != 0.0 && beta < threshold)) throw DomainError("beta must be nonzero and below (2 - alpha) nu pi^2");
}

struct SupResult {
    double sup = 0;
    double argmax = 0;
};

std::vector<SupResult> sup_over_x(double alpha, const std::vector<double>& betas, const KernelSpec& spec,
                                  const IntegralBoundSettings& st, double threshold) {
    std::vector<SupResult> out(betas.size());
    const int m = st.x_points;
    for (int i = 1; i <= m; ++i) {
        const double x = static_cast<double>(i) / (m + 1);
        if (x > 0.5 + 1e-12) break; // g(s, x, y) = g(s, 1 - x, 1 - y)
        const auto tab = build_table(spec, alpha, x, st);
        for (std::size_t b = 0; b < betas.size(); ++b) {
            const double v = evaluate_table(tab, alpha, betas[b], threshold, st.t_max);
            if (v > out[b].sup) out[b] = {v, x};
        }
    }
    return out;
}

} // namespace

double integral_bound_value(double alpha, double beta, double x, const KernelSpec& spec,
                            const IntegralBoundSettings& settings) {
    const double threshold = (2.0 - alpha) * spec.nu * kPi * kPi;
    check_bound_args(alpha, beta, threshold, spec);
    if (!(x > 0.0 && x < 1.0)) throw DomainError("x must lie in (0, 1)");
    return evaluate_table(build_table(spec, alpha, x, settings), alpha, beta, threshold, settings.t_max);
}

IntegralBoundReport verify_integral_bounds(double alpha, const std::vector<double>& betas,
                                           const KernelSpec& spec, const IntegralBoundSettings& settings) {
    IntegralBoundReport rep;
    rep.alpha = alpha;
    rep.threshold = (2.0 - alpha) * spec.nu * kPi * kPi;
    if (betas.empty()) throw DomainError("empty beta grid");
    for (double b : betas) check_bound_args(alpha, b, rep.threshold, spec);

    IntegralBoundSettings fine = settings;
    fine.s_panels *= 2;
    fine.y_panels *= 2;
    fine.x_points = 2 * settings.x_points + 1;
    const auto coarse = sup_over_x(alpha, betas, spec, settings, rep.threshold);
    const auto refined = sup_over_x(alpha, betas, spec, fine, rep.threshold);

    for (std::size_t i = 0; i < betas.size(); ++i) {
        IntegralBoundPoint p;
        p.alpha = alpha;
        p.beta = betas[i];
        p.sup = coarse[i].sup;
        p.argmax_x = coarse[i].argmax;
        p.shape = betas[i] < 0.0
                      ? std::pow(-betas[i], (alpha - 1.0) / 2.0)
                      : std::pow(betas[i], (alpha - 1.0) / 2.0) + 1.0 / (rep.threshold - betas[i]);
        p.constant = p.sup / p.shape;
        p.refined_sup = refined[i].sup;
        p.refinement_change = std::abs(p.refined_sup - p.sup) / p.refined_sup;
        rep.points.push_back(p);
    }
    for (std::size_t i = 1; i < betas.size(); ++i) {
        const double b0 = betas[i - 1];
        const double b1 = betas[i];
        double e = std::numeric_limits<double>::quiet_NaN();
        const double ls = std::log(rep.points[i].refined_sup / rep.points[i - 1].refined_sup);
        if (b0 < 0.0 && b1 < 0.0) {
            e = ls / std::log(b1 / b0);
        } else if (b0 > 0.0 && b1 > 0.0) {
            e = ls / std::log((rep.threshold - b1) / (rep.threshold - b0));
        }
        rep.local_exponents.push_back(e);
    }
    return rep;
}

} // namespace sheat
