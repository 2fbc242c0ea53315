#include "sheat/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sheat/errors.hpp"

namespace sheat {

const char* to_string(Scheme s) {
    return s == Scheme::SemiImplicit ? "semi_implicit" : "spectral";
}

Scheme scheme_from_string(const std::string& s) {
    if (s == "semi_implicit") return Scheme::SemiImplicit;
    if (s == "spectral") return Scheme::Spectral;
    throw DomainError("unknown scheme '" + s + "'");
}

void SolverParams::validate() const {
    grid.validate();
    if (!(nu > 0.0)) throw DomainError("nu must be positive");
    if (!(lambda >= 0.0)) throw DomainError("lambda must be nonnegative");
    if (boundary == Boundary::Free) throw DomainError("solver needs a Dirichlet or Neumann boundary");
    if (grid.dt > grid.dx() * (1.0 + 1e-12)) {
        throw ConfigError("time step must not exceed dx (noise variance dt/dx per node)");
    }
}

void SimulationConfig::validate() const {
    params.validate();
    u0.validate();
    if (scheme == Scheme::Spectral && params.boundary != Boundary::Dirichlet) {
        throw DomainError("spectral scheme supports the Dirichlet boundary only");
    }
    if (n_modes < 0 || n_modes > params.grid.n_interior) {
        throw DomainError("n_modes must lie in [0, n_interior]");
    }
    for (double t : observation_times) params.grid.step_of(t);
}

bool SolutionPath::has_time(double t) const {
    return std::any_of(times.begin(), times.end(),
                       [&](double s) { return std::abs(s - t) <= 1e-9 * std::max(1.0, t); });
}

std::span<const double> SolutionPath::at(double t) const {
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, t)) return values[i];
    }
    throw DomainError("time " + std::to_string(t) + " not stored in path");
}

SemiImplicitStepper::SemiImplicitStepper(const SolverParams& params) : params_(params) {
    params_.validate();
    const int n = params_.grid.n_interior;
    const double dx = params_.grid.dx();
    const double r = params_.nu * params_.grid.dt / (dx * dx);
    c_prime_.assign(static_cast<std::size_t>(n), 0.0);
    inv_denom_.assign(static_cast<std::size_t>(n), 0.0);
    noise_.assign(static_cast<std::size_t>(n), 0.0);
    const bool neumann = params_.boundary == Boundary::Neumann;
    auto diag = [&](int j) {
        if (neumann && (j == 0 || j == n - 1)) return n == 1 ? 1.0 : 1.0 + r;
        return 1.0 + 2.0 * r;
    };
    // Thomas algorithm with constant off-diagonals -r.
    double denom = diag(0);
    inv_denom_[0] = 1.0 / denom;
    c_prime_[0] = -r / denom;
    for (int j = 1; j < n; ++j) {
        denom = diag(j) + r * c_prime_[static_cast<std::size_t>(j - 1)];
        inv_denom_[static_cast<std::size_t>(j)] = 1.0 / denom;
        c_prime_[static_cast<std::size_t>(j)] = -r / denom;
    }
}

void SemiImplicitStepper::solve(std::span<double> d) const {
    const std::size_t n = d.size();
    const double r = params_.nu * params_.grid.dt / (params_.grid.dx() * params_.grid.dx());
    d[0] *= inv_denom_[0];
    for (std::size_t j = 1; j < n; ++j) d[j] = (d[j] + r * d[j - 1]) * inv_denom_[j];
    for (std::size_t j = n - 1; j-- > 0;) d[j] -= c_prime_[j] * d[j + 1];
}

void SemiImplicitStepper::step(std::span<double> state, const NoiseStream& stream,
                               long step_index) {
    if (state.size() != static_cast<std::size_t>(params_.grid.n_interior)) {
        throw DomainError("state length must equal n_interior");
    }
    if (params_.lambda != 0.0) {
        stream.sample_increments(step_index, noise_);
        const double scale = params_.lambda / params_.grid.dx();
        for (std::size_t j = 0; j < state.size(); ++j) {
            state[j] += scale * params_.sigma(state[j]) * noise_[j];
        }
    }
    solve(state);
    double probe = 0.0;
    for (double v : state) probe += v;
    if (!std::isfinite(probe)) {
        throw NumericalError("non-finite state after step " + std::to_string(step_index),
                             step_index);
    }
}

std::vector<double> step_semi_implicit(std::span<const double> state, const NoiseStream& stream,
                                       long step_index, const SolverParams& params) {
    SemiImplicitStepper stepper(params);
    std::vector<double> out(state.begin(), state.end());
    stepper.step(out, stream, step_index);
    return out;
}

SpectralStepper::SpectralStepper(const SolverParams& params, int n_modes)
    : params_(params), n_modes_(n_modes == 0 ? params.grid.n_interior : n_modes) {
    params_.validate();
    if (params_.boundary != Boundary::Dirichlet) {
        throw DomainError("spectral scheme supports the Dirichlet boundary only");
    }
    if (n_modes_ < 1 || n_modes_ > params_.grid.n_interior) {
        throw DomainError("n_modes must lie in [1, n_interior]");
    }
    const int n = params_.grid.n_interior;
    sine_ = sine_transform_matrix(n, n_modes_);
    decay_.resize(static_cast<std::size_t>(n_modes_));
    const double rate = params_.nu * std::numbers::pi * std::numbers::pi * params_.grid.dt;
    for (int m = 0; m < n_modes_; ++m) {
        decay_[static_cast<std::size_t>(m)] = std::exp(-rate * (m + 1.0) * (m + 1.0));
    }
    nodal_.resize(static_cast<std::size_t>(n));
    noise_.resize(static_cast<std::size_t>(n));
    forcing_.resize(static_cast<std::size_t>(n_modes_));
}

std::vector<double> SpectralStepper::to_modes(std::span<const double> nodal) const {
    std::vector<double> a(static_cast<std::size_t>(n_modes_));
    apply_sine_transform(sine_, n_modes_, nodal, a);
    const double dx = params_.grid.dx();
    for (double& v : a) v *= dx;
    return a;
}

void SpectralStepper::to_nodes(std::span<const double> coeffs, std::span<double> out) const {
    const std::size_t n = out.size();
    std::fill(out.begin(), out.end(), 0.0);
    for (int m = 0; m < n_modes_; ++m) {
        const double a = coeffs[static_cast<std::size_t>(m)];
        const double* row = sine_.data() + static_cast<std::size_t>(m) * n;
        for (std::size_t j = 0; j < n; ++j) out[j] += a * row[j];
    }
}

std::vector<double> SpectralStepper::to_nodes(std::span<const double> coeffs) const {
    std::vector<double> out(static_cast<std::size_t>(params_.grid.n_interior));
    to_nodes(coeffs, out);
    return out;
}

void SpectralStepper::step(std::span<double> coeffs, const NoiseStream& stream, long step_index) {
    if (coeffs.size() != static_cast<std::size_t>(n_modes_)) {
        throw DomainError("coefficient vector length must equal n_modes");
    }
    if (params_.lambda != 0.0) {
        to_nodes(coeffs, nodal_);
        stream.sample_increments(step_index, noise_);
        for (std::size_t j = 0; j < nodal_.size(); ++j) {
            nodal_[j] = params_.lambda * params_.sigma(nodal_[j]) * noise_[j];
        }
        apply_sine_transform(sine_, n_modes_, nodal_, forcing_);
        for (std::size_t m = 0; m < coeffs.size(); ++m) coeffs[m] += forcing_[m];
    }
    double probe = 0.0;
    for (std::size_t m = 0; m < coeffs.size(); ++m) {
        coeffs[m] *= decay_[m];
        probe += coeffs[m];
    }
    if (!std::isfinite(probe)) {
        throw NumericalError("non-finite coefficients after step " + std::to_string(step_index),
                             step_index);
    }
}

std::vector<double> step_spectral(std::span<const double> coeffs, const NoiseStream& stream,
                                  long step_index, const SolverParams& params) {
    SpectralStepper stepper(params, static_cast<int>(coeffs.size()));
    std::vector<double> out(coeffs.begin(), coeffs.end());
    stepper.step(out, stream, step_index);
    return out;
}

SolutionPath simulate_path(const SimulationConfig& config, std::uint64_t sample_index) {
    config.validate();
    const auto& grid = config.params.grid;
    SolutionPath path;
    path.grid = grid;
    path.boundary = config.params.boundary;
    path.lambda = config.params.lambda;
    path.sigma = config.params.sigma;

    std::vector<long> obs_steps;
    for (double t : config.observation_times) obs_steps.push_back(grid.step_of(t));
    std::sort(obs_steps.begin(), obs_steps.end());
    obs_steps.erase(std::unique(obs_steps.begin(), obs_steps.end()), obs_steps.end());
    const long last = obs_steps.empty() ? grid.n_steps() : obs_steps.back();

    const NoiseStream stream(config.master_seed, sample_index, grid);
    std::vector<double> u = project_initial(config.u0, grid);
    std::size_t next_obs = 0;
    auto record = [&](long k, std::span<const double> values) {
        while (next_obs < obs_steps.size() && obs_steps[next_obs] == k) {
            path.times.push_back(static_cast<double>(k) * grid.dt);
            path.values.emplace_back(values.begin(), values.end());
            ++next_obs;
        }
    };
    record(0, u);

    if (config.scheme == Scheme::SemiImplicit) {
        SemiImplicitStepper stepper(config.params);
        for (long k = 0; k < last; ++k) {
            stepper.step(u, stream, k);
            record(k + 1, u);
        }
    } else {
        SpectralStepper stepper(config.params, config.n_modes);
        auto a = stepper.to_modes(u);
        for (long k = 0; k < last; ++k) {
            stepper.step(a, stream, k);
            if (next_obs < obs_steps.size() && obs_steps[next_obs] == k + 1) {
                stepper.to_nodes(a, u);
                record(k + 1, u);
            }
        }
    }
    return path;
}

} // namespace sheat
