#include "sheat/noise.hpp"

#include <cmath>
#include <numbers>

#include "sheat/errors.hpp"

namespace sheat {

long GridSpec::n_steps() const {
    const double r = horizon / dt;
    const double nearest = std::round(r);
    if (std::abs(r - nearest) <= 1e-9 * std::max(1.0, r)) return static_cast<long>(nearest);
    return static_cast<long>(std::ceil(r));
}

long GridSpec::step_of(double t) const {
    const double r = t / dt;
    const double k = std::round(r);
    if (std::abs(r - k) > 1e-6 || k < 0 || k > static_cast<double>(n_steps())) {
        throw DomainError("time " + std::to_string(t) + " is not on the time grid");
    }
    return static_cast<long>(k);
}

void GridSpec::validate() const {
    if (n_interior < 1) throw DomainError("grid needs at least one interior node");
    if (!(dt > 0.0)) throw DomainError("time step must be positive");
    if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
}

Philox4x32::Counter Philox4x32::apply(Counter ctr, Key key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

NoiseStream::NoiseStream(std::uint64_t master_seed, std::uint64_t sample_index, GridSpec grid)
    : seed_(master_seed), sample_(sample_index), grid_(grid) {
    grid_.validate();
}

void NoiseStream::standard_normals(long step_index, std::span<double> out) const {
    if (step_index < 0) throw DomainError("negative step index");
    const Philox4x32::Key key = {static_cast<std::uint32_t>(seed_),
                                 static_cast<std::uint32_t>(seed_ >> 32)};
    const auto step = static_cast<std::uint64_t>(step_index);
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    constexpr double kInv53 = 1.0 / 9007199254740992.0; // 2^-53
    for (std::size_t pair = 0; 2 * pair < out.size(); ++pair) {
        const Philox4x32::Counter ctr = {
            static_cast<std::uint32_t>(pair), static_cast<std::uint32_t>(step),
            static_cast<std::uint32_t>(sample_),
            static_cast<std::uint32_t>(sample_ >> 32) ^ static_cast<std::uint32_t>(step >> 32)};
        const auto r = Philox4x32::apply(ctr, key);
        const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
        const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
        // u1 in (0, 1], u2 in [0, 1)
        const double u1 = (static_cast<double>(a >> 11) + 1.0) * kInv53;
        const double u2 = static_cast<double>(b >> 11) * kInv53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        out[2 * pair] = radius * std::cos(kTwoPi * u2);
        if (2 * pair + 1 < out.size()) out[2 * pair + 1] = radius * std::sin(kTwoPi * u2);
    }
}

void NoiseStream::sample_increments(long step_index, std::span<double> out) const {
    if (step_index < 0 || step_index >= grid_.n_steps()) {
        throw DomainError("step index " + std::to_string(step_index) + " outside [0, n_steps)");
    }
    if (out.size() != static_cast<std::size_t>(grid_.n_interior)) {
        throw DomainError("increment buffer must have n_interior entries");
    }
    standard_normals(step_index, out);
    const double scale = std::sqrt(grid_.dt * grid_.dx());
    for (double& v : out) v *= scale;
}

std::vector<double> NoiseStream::sample_increments(long step_index) const {
    std::vector<double> out(static_cast<std::size_t>(grid_.n_interior));
    sample_increments(step_index, out);
    return out;
}

std::vector<double> NoiseStream::spectral_increments(long step_index, int n_modes) const {
    if (n_modes < 1 || n_modes > grid_.n_interior) {
        throw DomainError("mode count must lie in [1, n_interior]");
    }
    const auto cells = sample_increments(step_index);
    const auto s = sine_transform_matrix(grid_.n_interior, n_modes);
    std::vector<double> out(static_cast<std::size_t>(n_modes));
    apply_sine_transform(s, n_modes, cells, out);
    return out;
}

std::vector<double> sine_transform_matrix(int n_interior, int n_modes) {
    std::vector<double> s(static_cast<std::size_t>(n_interior) * n_modes);
    const double h = 1.0 / (n_interior + 1);
    for (int n = 0; n < n_modes; ++n) {
        for (int j = 0; j < n_interior; ++j) {
            // Reduce the phase exactly: (n+1)(j+1) mod 2(N+1).
            const long phase = (static_cast<long>(n + 1) * (j + 1)) % (2L * (n_interior + 1));
            s[static_cast<std::size_t>(n) * n_interior + j] =
                std::sqrt(2.0) * std::sin(std::numbers::pi * phase * h);
        }
    }
    return s;
}

void apply_sine_transform(std::span<const double> s_matrix, int n_modes, std::span<const double> v,
                          std::span<double> out) {
    const std::size_t n = v.size();
    for (int m = 0; m < n_modes; ++m) {
        const double* row = s_matrix.data() + static_cast<std::size_t>(m) * n;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * v[j];
        out[static_cast<std::size_t>(m)] = acc;
    }
}

} // namespace sheat
