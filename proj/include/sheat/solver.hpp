#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sheat/kernel.hpp"
#include "sheat/model.hpp"
#include "sheat/noise.hpp"

namespace sheat {

enum class Scheme { SemiImplicit, Spectral };

const char* to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct SolverParams {
    double nu = 0.5;
    double lambda = 1.0;
    SigmaSpec sigma;
    GridSpec grid;
    Boundary boundary = Boundary::Dirichlet;

    /// dt <= dx keeps the per-node noise variance dt/dx at most one.
    void validate() const;
};

/// One path's worth of configuration. simulate_path is a pure function of
/// (SimulationConfig, sample_index).
struct SimulationConfig {
    SolverParams params;
    InitialData u0;
    std::vector<double> observation_times; // must lie on the time grid
    Scheme scheme = Scheme::SemiImplicit;
    int n_modes = 0; // spectral scheme; 0 means n_interior
    std::uint64_t master_seed = 0;

    void validate() const;
};

/// Snapshots u(t_k, x_j) at the observation times, interior nodes only.
struct SolutionPath {
    GridSpec grid;
    Boundary boundary = Boundary::Dirichlet;
    double lambda = 0;
    SigmaSpec sigma;
    std::vector<double> times;
    std::vector<std::vector<double>> values;

    /// Snapshot at time t; DomainError when t was not observed.
    std::span<const double> at(double t) const;
    bool has_time(double t) const;
};

/// Semi-implicit Euler: (I - nu dt L) u^{k+1} = u^k + lambda sigma(u^k) dW^k / dx.
/// L is the second difference with zero ghosts (Dirichlet) or mirrored ghosts
/// (Neumann). The tridiagonal factorization is computed once.
class SemiImplicitStepper {
public:
    explicit SemiImplicitStepper(const SolverParams& params);

    /// Advances `state` in place using increments from `stream` at `step_index`.
    /// Throws NumericalError when the new state is not finite.
    void step(std::span<double> state, const NoiseStream& stream, long step_index);

    /// Deterministic part only: solves (I - nu dt L) out = rhs in place.
    void solve(std::span<double> rhs) const;

private:
    SolverParams params_;
    std::vector<double> c_prime_;
    std::vector<double> inv_denom_;
    std::vector<double> noise_;
};

std::vector<double> step_semi_implicit(std::span<const double> state, const NoiseStream& stream,
                                       long step_index, const SolverParams& params);

/// Exponential Euler on the discrete sine basis e_n = sqrt(2) sin(n pi x):
///   a_n^{k+1} = e^{-nu n^2 pi^2 dt} (a_n^k + lambda sum_j e_n(x_j) sigma(u_j^k) dW_j^k).
/// Dirichlet only.
class SpectralStepper {
public:
    SpectralStepper(const SolverParams& params, int n_modes);

    int n_modes() const { return n_modes_; }
    /// a_n = dx sum_j e_n(x_j) u_j.
    std::vector<double> to_modes(std::span<const double> nodal) const;
    /// u_j = sum_n a_n e_n(x_j).
    std::vector<double> to_nodes(std::span<const double> coeffs) const;
    void to_nodes(std::span<const double> coeffs, std::span<double> out) const;

    void step(std::span<double> coeffs, const NoiseStream& stream, long step_index);

private:
    SolverParams params_;
    int n_modes_;
    std::vector<double> sine_; // n_modes x n_interior
    std::vector<double> decay_;
    std::vector<double> nodal_;
    std::vector<double> noise_;
    std::vector<double> forcing_;
};

std::vector<double> step_spectral(std::span<const double> coeffs, const NoiseStream& stream,
                                  long step_index, const SolverParams& params);

SolutionPath simulate_path(const SimulationConfig& config, std::uint64_t sample_index);

} // namespace sheat
