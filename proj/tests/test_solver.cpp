#include "doctest.h"

#include <cmath>
#include <numbers>

#include "sheat/errors.hpp"
#include "sheat/solver.hpp"

using namespace sheat;

namespace {

constexpr double kPi = std::numbers::pi;

SimulationConfig deterministic_sine(int n, double dt, double horizon, Scheme scheme) {
    SimulationConfig c;
    c.params.nu = 0.5;
    c.params.lambda = 0.0;
    c.params.grid = GridSpec{n, dt, horizon};
    c.u0 = InitialData::sine_mode(1);
    c.observation_times = {0.0, horizon};
    c.scheme = scheme;
    return c;
}

} // namespace

TEST_CASE("sigma constants") {
    const auto lin = SigmaSpec::linear(2.0);
    CHECK(lin(0.0) == 0.0);
    CHECK(lin.k_lower() == 2.0);
    CHECK(lin.k_upper() == 2.0);
    const auto ls = SigmaSpec::linear_plus_sine(1.0, 0.5);
    CHECK(ls(0.0) == 0.0);
    CHECK(ls.k_upper() == 1.5);
    CHECK(ls.k_lower() == 0.5);
    for (double u = -20; u <= 20; u += 0.37) {
        CHECK(std::abs(ls(u)) >= ls.k_lower() * std::abs(u) - 1e-14);
        for (double v = -5; v <= 5; v += 0.91) {
            CHECK(std::abs(ls(u) - ls(v)) <= ls.k_upper() * std::abs(u - v) + 1e-14);
        }
    }
    CHECK_THROWS_AS(SigmaSpec::linear_plus_sine(1.0, 1.0), DomainError);
}

TEST_CASE("initial data") {
    GridSpec g{99, 1e-3, 1.0};
    const auto s = project_initial(InitialData::sine_mode(1), g);
    for (int j = 0; j < g.n_interior; ++j) CHECK(s[j] == doctest::Approx(std::sin(kPi * g.x(j))));
    const auto bump = InitialData::bump(0.2);
    CHECK(bump(0.5) == doctest::Approx(1.0));
    CHECK(bump(0.2) == 0.0);
    CHECK(bump(0.1) == 0.0);
    CHECK(bump(0.85) == 0.0);
    CHECK(bump(0.21) > 0.0);
    CHECK(bump(0.79) > 0.0);
    CHECK_THROWS_AS(project_initial(InitialData::from_table({1, 2, 3}), g), DomainError);
    const auto tab = InitialData::from_table({1.0, 3.0});
    CHECK(tab(0.0) == 0.0);
    CHECK(tab(1.0 / 3) == doctest::Approx(1.0));
    CHECK(tab(0.5) == doctest::Approx(2.0));
}

TEST_CASE("semi-implicit: deterministic eigenmode decay") {
    const auto c = deterministic_sine(255, 1e-4, 0.5, Scheme::SemiImplicit);
    const auto path = simulate_path(c, 0);
    const auto u = path.at(0.5);
    for (int j = 0; j < c.params.grid.n_interior; ++j) {
        const double exact = std::exp(-0.5 * kPi * kPi * 0.5) * std::sin(kPi * c.params.grid.x(j));
        CHECK(std::abs(u[j] - exact) <= 0.01 * std::abs(exact));
    }
}

TEST_CASE("semi-implicit: neumann keeps constants") {
    SimulationConfig c;
    c.params.lambda = 0;
    c.params.boundary = Boundary::Neumann;
    c.params.grid = GridSpec{64, 1e-3, 0.5};
    c.u0 = InitialData::from_table(std::vector<double>(64, 1.0));
    c.observation_times = {0.5};
    const auto path = simulate_path(c, 0);
    for (double v : path.at(0.5)) CHECK(std::abs(v - 1.0) < 1e-11);
}

TEST_CASE("spectral: coefficients decay exactly without noise") {
    SolverParams p;
    p.lambda = 0;
    p.grid = GridSpec{63, 1e-3, 1.0};
    SpectralStepper st(p, 63);
    auto a = st.to_modes(project_initial(InitialData::sine_mode(3), p.grid));
    NoiseStream s(0, 0, p.grid);
    for (long k = 0; k < 100; ++k) {
        const auto before = a;
        st.step(a, s, k);
        for (int m = 0; m < 63; ++m) {
            CHECK(a[m] == doctest::Approx(before[m] * std::exp(-0.5 * kPi * kPi * (m + 1) * (m + 1) * 1e-3)));
        }
    }
    for (int m = 0; m < 63; ++m) {
        if (m == 2) {
            // sin(3 pi x) has coefficient 1/sqrt(2) in the sqrt(2) sin basis.
            CHECK(a[m] == doctest::Approx(std::exp(-0.5 * kPi * kPi * 9 * 0.1) / std::sqrt(2.0)).epsilon(1e-10));
        } else {
            CHECK(std::abs(a[m]) < 1e-12);
        }
    }
    // Free-function form agrees with the stepper.
    const auto next = step_spectral(a, s, 0, p);
    CHECK(next[2] == doctest::Approx(a[2] * std::exp(-0.5 * kPi * kPi * 9 * 1e-3)));
}

TEST_CASE("spectral: deterministic decay matches the exact mode") {
    const auto c = deterministic_sine(63, 1e-3, 0.5, Scheme::Spectral);
    const auto path = simulate_path(c, 0);
    const auto u = path.at(0.5);
    for (int j = 0; j < 63; ++j) {
        CHECK(u[j] == doctest::Approx(std::exp(-0.25 * kPi * kPi) * std::sin(kPi * c.params.grid.x(j))).epsilon(1e-10));
    }
}

TEST_CASE("configuration errors") {
    auto c = deterministic_sine(31, 1e-3, 0.1, Scheme::Spectral);
    c.params.boundary = Boundary::Neumann;
    CHECK_THROWS_AS(simulate_path(c, 0), DomainError);
    auto d = deterministic_sine(31, 0.1, 1.0, Scheme::SemiImplicit);
    CHECK_THROWS_AS(simulate_path(d, 0), ConfigError);
    auto e = deterministic_sine(31, 1e-3, 0.1, Scheme::SemiImplicit);
    e.observation_times = {0.05005};
    CHECK_THROWS_AS(simulate_path(e, 0), DomainError);
}

TEST_CASE("non-finite states abort with the step index") {
    auto c = deterministic_sine(31, 1e-3, 0.1, Scheme::SemiImplicit);
    c.params.lambda = 1e300;
    try {
        simulate_path(c, 0);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(e.step() >= 0);
    }
}

TEST_CASE("paths are reproducible and storage does not change dynamics") {
    SimulationConfig c;
    c.params.lambda = 1.0;
    c.params.grid = GridSpec{63, 1e-3, 0.2};
    c.u0 = InitialData::bump(0.2);
    c.master_seed = 11;
    c.observation_times = {0.1, 0.2};
    const auto a = simulate_path(c, 4);
    const auto b = simulate_path(c, 4);
    CHECK(a.values == b.values);
    auto dense = c;
    dense.observation_times.clear();
    for (int k = 0; k <= 200; ++k) dense.observation_times.push_back(k * 1e-3);
    const auto d = simulate_path(dense, 4);
    CHECK(std::equal(a.at(0.1).begin(), a.at(0.1).end(), d.at(0.1).begin()));
    CHECK(std::equal(a.at(0.2).begin(), a.at(0.2).end(), d.at(0.2).begin()));
    CHECK(simulate_path(c, 5).values != a.values);
}

TEST_CASE("semi-implicit free function matches the stepper") {
    SolverParams p;
    p.lambda = 0.7;
    p.grid = GridSpec{15, 1e-3, 1.0};
    NoiseStream s(1, 2, p.grid);
    std::vector<double> u(15, 0.3);
    const auto once = step_semi_implicit(u, s, 3, p);
    SemiImplicitStepper st(p);
    st.step(u, s, 3);
    CHECK(once == u);
}

TEST_CASE("near-boundary nodal value decreases under refinement at lambda = 0") {
    double prev = 1e300;
    for (int lev = 0; lev < 3; ++lev) {
        SimulationConfig c;
        c.params.lambda = 0.0;
        c.params.grid = GridSpec{32 * (1 << lev) - 1, 1e-3 / std::pow(4.0, lev), 0.25};
        c.u0 = InitialData::bump(0.2);
        c.observation_times = {0.25};
        const double near = simulate_path(c, 0).values[0][0];
        CHECK(near > 0.0);
        CHECK(near < prev);
        prev = near;
    }
}

// Shared-noise pathwise gap between the two schemes, RMS over paths of the sup
// over nodes. Levels refine dt -> dt/4, dx -> dx/2.
TEST_CASE("spectral and semi-implicit paths converge under joint refinement") {
    auto gap = [](int lev) {
        const int n = 32 * (1 << lev) - 1;
        const int paths = 20;
        double acc = 0.0;
        for (int s = 0; s < paths; ++s) {
            SimulationConfig c;
            c.params.lambda = 1.0;
            c.params.grid = GridSpec{n, 1e-3 / std::pow(4.0, lev), 0.25};
            c.u0 = InitialData::bump(0.2);
            c.observation_times = {0.25};
            c.master_seed = 5;
            const auto a = simulate_path(c, s);
            c.scheme = Scheme::Spectral;
            const auto b = simulate_path(c, s);
            double d = 0.0;
            for (int j = 0; j < n; ++j) d = std::max(d, std::abs(a.values[0][j] - b.values[0][j]));
            acc += d * d;
        }
        return std::sqrt(acc / paths);
    };
    const double g2 = gap(2);
    const double g3 = gap(3);
    CHECK(g3 < 0.02);
    CHECK(g2 / g3 >= 1.5);
}
