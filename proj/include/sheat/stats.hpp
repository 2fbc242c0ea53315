#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "sheat/noise.hpp"
#include "sheat/solver.hpp"

namespace sheat {

enum class FunctionalKind { Pointwise, SupNorm, LpNorm };

/// Path functional whose expectation is estimated:
///   Pointwise: |u(t, x*)|^p at the node nearest x
///   SupNorm:   (max_j |u(t, x_j)|)^p
///   LpNorm:    dx sum_j |u(t, x_j)|^p
struct Functional {
    FunctionalKind kind = FunctionalKind::Pointwise;
    double x = 0.5;
    double p = 2.0;

    static Functional pointwise(double x, double p);
    static Functional sup_norm(double p);
    static Functional lp_norm(double p);

    std::string name() const;
    void validate() const;
    bool operator==(const Functional& o) const = default;
};

/// log of the functional on one snapshot (-inf for a zero field).
double functional_log_value(const Functional& f, std::span<const double> u, const GridSpec& grid);
double functional_value(const Functional& f, std::span<const double> u, const GridSpec& grid);

/// Streaming mean/variance of a nonnegative functional at one observation time.
///
/// Two accumulators run side by side: a Chan/Welford pair (mean, M2) and the
/// log-sums log sum v, log sum v^2. Once any value exceeds `kLogThreshold`
/// (or a positive value falls below its reciprocal)
/// the estimate is flagged `log_domain` and reports from the log-sums.
class MomentEstimate {
public:
    static constexpr double kLogThreshold = 1e100;

    MomentEstimate() = default;
    MomentEstimate(Functional f, double t) : functional_(f), t_(t) {}

    void add(double value);
    /// Adds exp(log_value) without forming it.
    void add_log(double log_value);
    void merge(const MomentEstimate& other);

    const Functional& functional() const { return functional_; }
    double t() const { return t_; }
    std::uint64_t n() const { return n_; }
    bool log_domain() const { return log_domain_; }

    double mean() const;
    double variance() const;          // unbiased, needs n >= 2
    double ci_half_width() const;     // 1.96 sqrt(variance / n)
    double log_mean() const;          // log of the sample mean
    double log_ci_half_width() const; // 1.96 sqrt(variance / n) / mean, log scale
    double log_sum() const { return log_s1_; }
    double log_sum_sq() const { return log_s2_; }

private:
    Functional functional_;
    double t_ = 0;
    std::uint64_t n_ = 0;
    double mean_ = 0;
    double m2_ = 0;
    double log_s1_ = -std::numeric_limits<double>::infinity();
    double log_s2_ = -std::numeric_limits<double>::infinity();
    bool log_domain_ = false;
};

/// Adds the functional of `path` at the estimate's time (DomainError if the
/// path did not record that time).
MomentEstimate accumulate(MomentEstimate est, const SolutionPath& path);

/// Order-independent combination; DomainError on mismatched functional or time.
/// An estimate with n = 0 is the identity.
MomentEstimate merge(const MomentEstimate& a, const MomentEstimate& b);

struct Energy {
    double value = 0;
    double ci_half_width = 0;
    double log_value = 0;
    double log_ci_half_width = 0;
    bool log_domain = false;
};

/// (E ||u||_p^p)^{1/p} with a delta-method interval. Needs an LpNorm estimate
/// with n >= 2; a nonpositive mean raises NumericalError.
Energy p_energy(const MomentEstimate& est);

} // namespace sheat
