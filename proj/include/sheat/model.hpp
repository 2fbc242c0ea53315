#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sheat/noise.hpp"

namespace sheat {

/// Noise coefficient sigma with certified constants
///   |sigma(u) - sigma(v)| <= k_upper |u - v|,   |sigma(u)| >= k_lower |u|.
class SigmaSpec {
public:
    enum class Kind { Linear, LinearPlusSine };

    /// Linear(1).
    SigmaSpec() : SigmaSpec(Kind::Linear, 1.0, 0.0) {}

    static SigmaSpec linear(double k);
    /// sigma(u) = c u + d sin(u), c > d >= 0.
    static SigmaSpec linear_plus_sine(double c, double d);

    double operator()(double u) const {
        return kind_ == Kind::Linear ? c_ * u : c_ * u + d_ * std::sin(u);
    }

    Kind kind() const { return kind_; }
    double c() const { return c_; }
    double d() const { return d_; }
    double k_upper() const { return c_ + d_; }
    double k_lower() const { return c_ - d_; }
    bool is_linear() const { return kind_ == Kind::Linear; }

private:
    SigmaSpec(Kind kind, double c, double d) : kind_(kind), c_(c), d_(d) {}
    Kind kind_;
    double c_;
    double d_;
};

/// Deterministic initial profile u0 on [0, 1].
struct InitialData {
    enum class Kind { SineMode, Bump, Table };

    Kind kind = Kind::Bump;
    int mode = 1;        // SineMode
    double gamma = 0.2;  // Bump support margin
    double amplitude = 1.0;
    std::vector<double> table; // Table: values at interior nodes x_j = (j+1)/(m+1)

    static InitialData sine_mode(int n, double amplitude = 1.0);
    static InitialData bump(double gamma, double amplitude = 1.0);
    static InitialData from_table(std::vector<double> values);

    /// u0(x). Bump: amplitude * e * exp(-1 / (1 - s^2)) with s = (2x - 1) / (1 - 2 gamma),
    /// zero for |s| >= 1, peak `amplitude` at x = 1/2. Table: piecewise-linear
    /// through the interior values, zero at x = 0 and x = 1.
    double operator()(double x) const;

    void validate() const;
};

/// Nodal values u0(x_j) on the grid's interior nodes. A Table must have
/// exactly n_interior entries (DomainError otherwise) and is returned as is.
std::vector<double> project_initial(const InitialData& u0, const GridSpec& grid);

} // namespace sheat
