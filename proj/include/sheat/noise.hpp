#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace sheat {

/// Uniform space-time lattice: `n_interior` nodes x_j = j dx (j = 1..n),
/// dx = 1 / (n + 1), and n_steps = ceil(horizon / dt) time steps.
struct GridSpec {
    int n_interior = 127;
    double dt = 1e-4;
    double horizon = 1.0;

    double dx() const { return 1.0 / (n_interior + 1); }
    long n_steps() const;
    double x(int j) const { return (j + 1) * dx(); } // j = 0..n_interior-1
    /// nu dt / dx^2, recorded in manifests.
    double cfl(double nu) const { return nu * dt / (dx() * dx()); }
    /// Step index whose time equals t (within 1e-9 dt); throws DomainError otherwise.
    long step_of(double t) const;

    void validate() const;
};

/// Philox4x32-10 counter-based generator (Salmon et al.). One call maps a
/// 128-bit counter and 64-bit key to 128 random bits.
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;
    static Counter apply(Counter ctr, Key key);
};

/// Noise for one ensemble member. Increments are a pure function of
/// (master_seed, sample_index, step_index, cell).
class NoiseStream {
public:
    NoiseStream(std::uint64_t master_seed, std::uint64_t sample_index, GridSpec grid);

    std::uint64_t master_seed() const { return seed_; }
    std::uint64_t sample_index() const { return sample_; }
    const GridSpec& grid() const { return grid_; }

    /// Standard normals for (step, cell) pairs of cells 0..out.size()-1.
    void standard_normals(long step_index, std::span<double> out) const;

    /// Cell increments Delta W_j ~ N(0, dt dx), j = 0..n_interior-1.
    std::vector<double> sample_increments(long step_index) const;
    void sample_increments(long step_index, std::span<double> out) const;

    /// Mode increments <Delta W, sqrt(2) sin(n pi .)>, n = 1..n_modes, each
    /// N(0, dt). Obtained from sample_increments by the orthogonal discrete
    /// sine transform, so both views share one underlying draw.
    std::vector<double> spectral_increments(long step_index, int n_modes) const;

private:
    std::uint64_t seed_;
    std::uint64_t sample_;
    GridSpec grid_;
};

/// S[n][j] = sqrt(2) sin((n+1) pi x_j), row-major n_modes x n_interior.
std::vector<double> sine_transform_matrix(int n_interior, int n_modes);

/// out[n] = sum_j S[n][j] v[j].
void apply_sine_transform(std::span<const double> s_matrix, int n_modes, std::span<const double> v,
                          std::span<double> out);

} // namespace sheat
