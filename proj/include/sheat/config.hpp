#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sheat/kernel.hpp"
#include "sheat/oracle.hpp"
#include "sheat/regularity.hpp"
#include "sheat/solver.hpp"
#include "sheat/stats.hpp"

namespace sheat {

/// Everything a run needs, read from an INI file with sections
/// [model] [grid] [simulation] [moments] [oracle] [analysis] [kernel]
/// [regularity] [bounds] [output] [run]. Lists are comma separated.
struct ExperimentConfig {
    // [model]
    double nu = 0.5;
    Boundary boundary = Boundary::Dirichlet;
    std::string sigma = "linear"; // linear | linear_plus_sine
    double sigma_c = 1.0;
    double sigma_d = 0.0;
    std::vector<double> lambdas{1.0};
    std::string u0 = "bump"; // bump | sine
    double u0_gamma = 0.2;
    int u0_mode = 1;
    double u0_amplitude = 1.0;

    // [grid]
    int n_interior = 127;
    double dt = 1e-4;
    double horizon = 1.0;

    // [simulation]
    Scheme scheme = Scheme::SemiImplicit;
    int n_modes = 0;
    std::uint64_t n_samples = 1000;
    std::uint64_t master_seed = 0;
    std::uint64_t block_size = 64;
    std::vector<double> observation_times; // empty: observation_count uniform times
    int observation_count = 10;
    std::uint64_t sample_index = 0;        // path written by `simulate`

    // [moments]
    std::vector<double> p{2.0};
    std::vector<std::string> functionals{"pointwise", "lp_norm", "sup_norm"};
    double x = 0.5;

    // [oracle]
    std::string backend = "oracle"; // oracle | mc, for lyapunov / excitation / thresholds
    int panels = 200;
    bool error_estimate = true;
    int t_points = 40;

    // [analysis]
    double window_start = 0.5; // fraction of the horizon dropped before fitting slopes
    double confidence = 0.95;
    double excitation_time = 0.1;

    // [kernel]
    double kernel_tol = 1e-12;
    double gamma = 0.2;

    // [regularity]
    double grr_p = 8.0;
    double grr_delta = 1.0;
    double grr_epsilon = 0.25;
    double grr_time = 0.0; // 0: the horizon

    // [bounds]
    double alpha = 0.5;
    std::vector<double> betas{-16.0, -64.0, -256.0};

    // [output]
    std::string output_dir = "results";

    // [run]
    int workers = 0;

    /// Observation times on the dt grid, strictly increasing in (0, horizon].
    std::vector<double> resolved_times() const;
    SigmaSpec sigma_spec() const;
    InitialData initial_data() const;
    KernelSpec kernel_spec() const;
    GrrParams grr_params() const;
    std::vector<Functional> functional_list() const;
    SimulationConfig simulation(double lambda) const;
    OracleConfig oracle(double lambda) const;

    /// Throws ConfigError with a key-specific message.
    void validate() const;
};

/// Parses INI text. Unknown sections or keys, malformed values and failed
/// validation raise ConfigError.
ExperimentConfig parse_config(const std::string& ini_text);
ExperimentConfig load_config(const std::string& path);

/// "section.key=value"; ConfigError for unknown keys or malformed values.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Round-trips through parse_config: every key, at full precision.
std::string to_ini(const ExperimentConfig& cfg);

/// All registered keys as "section.key".
std::vector<std::string> config_keys();

/// Seed precedence: flag, then the SHEAT_SEED environment variable, then the file.
void resolve_seed(ExperimentConfig& cfg, std::optional<std::uint64_t> flag_seed);

} // namespace sheat
