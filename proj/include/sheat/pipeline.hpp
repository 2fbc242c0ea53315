#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "sheat/config.hpp"
#include "sheat/io.hpp"

namespace sheat {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,       // config or domain error
    kExitNumerical = 2,    // NaN abort, divergent quadrature, failed cells
    kExitVerification = 3, // a verification subcommand found a violated bound
};

/// kernel, simulate, oracle, moments, lyapunov, excitation, thresholds,
/// grr-check, verify-bounds, all.
const std::vector<std::string>& subcommands();

struct RunResult {
    int exit_code = kExitOk;
    RunManifest manifest;
    nlohmann::json diagnostic; // null on success
};

/// Runs one subcommand with outputs under out_dir / subcommand (for `all`,
/// each stage gets its own directory and out_dir / manifest.json lists every
/// output). Exceptions are mapped to exit codes and JSON diagnostics; the
/// manifest is written whenever the output directory is usable.
RunResult run_subcommand(const std::string& subcommand, const ExperimentConfig& cfg,
                         const std::filesystem::path& out_dir);

/// Reads either an INI config or a manifest JSON (its config snapshot).
ExperimentConfig load_config_or_manifest(const std::filesystem::path& path);

/// Calibrated kernel constants recorded in every manifest: kappa1, kappa2
/// (lower bound), K1, K2 (x-derivative bound), K3 (long-time bound) and the
/// grids used.
nlohmann::json calibrate_constants(const ExperimentConfig& cfg);

/// Machine-readable error report.
nlohmann::json make_diagnostic(const std::string& kind, const std::string& message, int exit_code,
                               long step = -1);

} // namespace sheat
