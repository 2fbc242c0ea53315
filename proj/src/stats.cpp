#include "sheat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sheat/errors.hpp"

namespace sheat {

namespace {

constexpr double kZ95 = 1.96;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

} // namespace

Functional Functional::pointwise(double x, double p) { return {FunctionalKind::Pointwise, x, p}; }
Functional Functional::sup_norm(double p) { return {FunctionalKind::SupNorm, 0.0, p}; }
Functional Functional::lp_norm(double p) { return {FunctionalKind::LpNorm, 0.0, p}; }

std::string Functional::name() const {
    std::ostringstream os;
    switch (kind) {
    case FunctionalKind::Pointwise:
        os << "pointwise(x=" << x << ")";
        break;
    case FunctionalKind::SupNorm:
        os << "sup_norm";
        break;
    case FunctionalKind::LpNorm:
        os << "lp_norm";
        break;
    }
    return os.str();
}

void Functional::validate() const {
    if (!(p >= 2.0) || !std::isfinite(p)) throw DomainError("moment order p must be finite and >= 2");
    if (kind == FunctionalKind::Pointwise && !(x >= 0.0 && x <= 1.0)) {
        throw DomainError("pointwise functional needs x in [0, 1]");
    }
}

double functional_log_value(const Functional& f, std::span<const double> u, const GridSpec& grid) {
    if (u.size() != static_cast<std::size_t>(grid.n_interior)) {
        throw DomainError("snapshot length does not match the grid");
    }
    auto log_abs = [](double v) { return v == 0.0 ? kNegInf : std::log(std::abs(v)); };
    switch (f.kind) {
    case FunctionalKind::Pointwise: {
        const double pos = f.x / grid.dx() - 1.0;
        const long j = std::clamp(std::lround(pos), 0L, static_cast<long>(u.size()) - 1);
        return f.p * log_abs(u[static_cast<std::size_t>(j)]);
    }
    case FunctionalKind::SupNorm: {
        double mx = 0.0;
        for (double v : u) mx = std::max(mx, std::abs(v));
        return f.p * log_abs(mx);
    }
    case FunctionalKind::LpNorm: {
        double acc = kNegInf;
        for (double v : u) acc = log_add(acc, f.p * log_abs(v));
        return acc + std::log(grid.dx());
    }
    }
    return kNegInf;
}

double functional_value(const Functional& f, std::span<const double> u, const GridSpec& grid) {
    if (f.kind == FunctionalKind::LpNorm) {
        double acc = 0.0;
        for (double v : u) acc += std::pow(std::abs(v), f.p);
        if (std::isfinite(acc)) {
            if (u.size() != static_cast<std::size_t>(grid.n_interior)) {
                throw DomainError("snapshot length does not match the grid");
            }
            return grid.dx() * acc;
        }
    }
    return std::exp(functional_log_value(f, u, grid));
}

void MomentEstimate::add(double value) {
    if (!(value >= 0.0)) throw DomainError("moment samples must be nonnegative");
    // Squares of values beyond 1e100 overflow and of values below 1e-100
    // underflow in the Welford sums; both go to the log domain.
    if (!std::isfinite(value) || value > kLogThreshold || (value > 0.0 && value < 1.0 / kLogThreshold)) {
        add_log(std::log(value));
        return;
    }
    ++n_;
    const double delta = value - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (value - mean_);
    log_s1_ = log_add(log_s1_, value == 0.0 ? kNegInf : std::log(value));
    log_s2_ = log_add(log_s2_, value == 0.0 ? kNegInf : 2.0 * std::log(value));
}

void MomentEstimate::add_log(double log_value) {
    if (std::isnan(log_value) || log_value == std::numeric_limits<double>::infinity()) {
        throw NumericalError("non-finite moment sample");
    }
    if (std::abs(log_value) <= std::log(kLogThreshold)) {
        add(std::exp(log_value));
        return;
    }
    log_domain_ = true;
    ++n_;
    log_s1_ = log_add(log_s1_, log_value);
    log_s2_ = log_add(log_s2_, 2.0 * log_value);
}

void MomentEstimate::merge(const MomentEstimate& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
        *this = other;
        return;
    }
    if (!(functional_ == other.functional_) || std::abs(t_ - other.t_) > 1e-12 * std::max(1.0, t_)) {
        throw DomainError("cannot merge estimates of different functionals or times");
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(other.n_);
    const double n = na + nb;
    const double delta = other.mean_ - mean_;
    mean_ += delta * (nb / n);
    m2_ += other.m2_ + delta * delta * (na * nb / n);
    n_ += other.n_;
    log_s1_ = log_add(log_s1_, other.log_s1_);
    log_s2_ = log_add(log_s2_, other.log_s2_);
    log_domain_ = log_domain_ || other.log_domain_;
}

double MomentEstimate::mean() const {
    if (n_ == 0) throw DomainError("empty estimate");
    return log_domain_ ? std::exp(log_mean()) : mean_;
}

double MomentEstimate::variance() const {
    if (n_ < 2) throw DomainError("variance needs at least 2 samples");
    const double n = static_cast<double>(n_);
    if (!log_domain_) return m2_ / (n - 1.0);
    // (S2 - S1^2 / n) / (n - 1), formed on the log scale.
    const double ratio = std::exp(log_s2_ - 2.0 * log_s1_) * n; // n S2 / S1^2 >= 1
    return std::exp(2.0 * log_mean()) * std::max(0.0, ratio - 1.0) * n / (n - 1.0);
}

double MomentEstimate::ci_half_width() const { return kZ95 * std::sqrt(variance() / static_cast<double>(n_)); }

double MomentEstimate::log_mean() const {
    if (n_ == 0) throw DomainError("empty estimate");
    if (!log_domain_) return mean_ > 0.0 ? std::log(mean_) : kNegInf;
    return log_s1_ - std::log(static_cast<double>(n_));
}

double MomentEstimate::log_ci_half_width() const {
    if (n_ < 2) throw DomainError("variance needs at least 2 samples");
    const double n = static_cast<double>(n_);
    if (!log_domain_) return mean_ > 0.0 ? ci_half_width() / mean_ : std::numeric_limits<double>::infinity();
    const double ratio = std::exp(log_s2_ - 2.0 * log_s1_) * n;
    const double rel_var = std::max(0.0, ratio - 1.0) * n / (n - 1.0); // variance / mean^2
    return kZ95 * std::sqrt(rel_var / n);
}

MomentEstimate accumulate(MomentEstimate est, const SolutionPath& path) {
    if (!path.has_time(est.t())) throw DomainError("path has no snapshot at the estimate's time");
    est.functional().validate();
    est.add_log(functional_log_value(est.functional(), path.at(est.t()), path.grid));
    return est;
}

MomentEstimate merge(const MomentEstimate& a, const MomentEstimate& b) {
    MomentEstimate out = a;
    out.merge(b);
    return out;
}

Energy p_energy(const MomentEstimate& est) {
    if (est.functional().kind != FunctionalKind::LpNorm) {
        throw DomainError("p-energy needs an LpNorm estimate");
    }
    if (est.n() < 2) throw DomainError("p-energy needs at least 2 samples");
    const double p = est.functional().p;
    const double lm = est.log_mean();
    if (!(lm > -std::numeric_limits<double>::infinity())) {
        throw NumericalError("p-energy undefined: ensemble mean is not positive");
    }
    Energy e;
    e.log_domain = est.log_domain();
    e.log_value = lm / p;
    e.log_ci_half_width = est.log_ci_half_width() / p;
    e.value = std::exp(e.log_value);
    // Delta method: d(mean^{1/p}) = mean^{1/p - 1} / p.
    e.ci_half_width = e.value * est.log_ci_half_width() / p;
    return e;
}

} // namespace sheat
