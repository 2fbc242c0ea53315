#include "sheat/model.hpp"

#include <cmath>
#include <algorithm>
#include <numbers>

#include "sheat/errors.hpp"

namespace sheat {

SigmaSpec SigmaSpec::linear(double k) {
    if (!(k > 0.0)) throw DomainError("linear sigma slope must be positive");
    return SigmaSpec(Kind::Linear, k, 0.0);
}

SigmaSpec SigmaSpec::linear_plus_sine(double c, double d) {
    if (!(c > d && d >= 0.0)) throw DomainError("linear+sine sigma needs c > d >= 0");
    return SigmaSpec(Kind::LinearPlusSine, c, d);
}

InitialData InitialData::sine_mode(int n, double amplitude) {
    InitialData u;
    u.kind = Kind::SineMode;
    u.mode = n;
    u.amplitude = amplitude;
    u.validate();
    return u;
}

InitialData InitialData::bump(double gamma, double amplitude) {
    InitialData u;
    u.kind = Kind::Bump;
    u.gamma = gamma;
    u.amplitude = amplitude;
    u.validate();
    return u;
}

InitialData InitialData::from_table(std::vector<double> values) {
    InitialData u;
    u.kind = Kind::Table;
    u.table = std::move(values);
    u.validate();
    return u;
}

void InitialData::validate() const {
    switch (kind) {
    case Kind::SineMode:
        if (mode < 1) throw DomainError("sine mode index must be >= 1");
        break;
    case Kind::Bump:
        if (!(gamma > 0.0 && gamma < 0.5)) throw DomainError("bump margin must lie in (0, 1/2)");
        break;
    case Kind::Table:
        if (table.empty()) throw DomainError("initial table is empty");
        for (double v : table) {
            if (!std::isfinite(v)) throw DomainError("initial table has non-finite entries");
        }
        break;
    }
}

double InitialData::operator()(double x) const {
    switch (kind) {
    case Kind::SineMode:
        return amplitude * std::sin(mode * std::numbers::pi * x);
    case Kind::Bump: {
        const double s = (2.0 * x - 1.0) / (1.0 - 2.0 * gamma);
        if (std::abs(s) >= 1.0) return 0.0;
        return amplitude * std::exp(1.0 - 1.0 / (1.0 - s * s));
    }
    case Kind::Table: {
        // Node k = 0..m+1 sits at k / (m + 1); nodes 0 and m+1 are zero.
        const auto m = table.size();
        const double pos = std::clamp(x, 0.0, 1.0) * static_cast<double>(m + 1);
        const auto k = std::min(static_cast<std::size_t>(pos), m);
        const double f = pos - static_cast<double>(k);
        auto node = [&](std::size_t i) { return (i == 0 || i == m + 1) ? 0.0 : table[i - 1]; };
        return (1.0 - f) * node(k) + f * node(k + 1);
    }
    }
    return 0.0;
}

std::vector<double> project_initial(const InitialData& u0, const GridSpec& grid) {
    u0.validate();
    if (u0.kind == InitialData::Kind::Table) {
        if (u0.table.size() != static_cast<std::size_t>(grid.n_interior)) {
            throw DomainError("initial table length " + std::to_string(u0.table.size()) +
                              " does not match n_interior " + std::to_string(grid.n_interior));
        }
        return u0.table;
    }
    std::vector<double> v(static_cast<std::size_t>(grid.n_interior));
    for (int j = 0; j < grid.n_interior; ++j) v[static_cast<std::size_t>(j)] = u0(grid.x(j));
    return v;
}

} // namespace sheat
