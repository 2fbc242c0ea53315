#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sheat/solver.hpp"
#include "sheat/stats.hpp"

namespace sheat {

struct EnsembleSpec {
    SimulationConfig sim;
    std::vector<Functional> functionals;
    std::uint64_t n_samples = 1000;
    std::uint64_t first_sample = 0;
    int workers = 0;              // 0: hardware concurrency
    std::uint64_t block_size = 64; // samples per work unit; fixes the merge tree

    void validate() const;
};

/// Ensemble statistics for every (functional, observation time) pair plus
/// the nodal mean field and its standard error.
struct EnsembleResult {
    std::vector<MomentEstimate> estimates; // functional-major: [f * n_times + k]
    std::vector<double> times;
    std::vector<std::vector<double>> mean_field; // [k][j]
    std::vector<std::vector<double>> mean_se;    // [k][j]
    std::uint64_t n_samples = 0;

    const MomentEstimate& get(const Functional& f, double t) const;
};

/// Optional per-path observer, called from worker threads with a path and its
/// sample index. Must be thread-safe.
using PathObserver = std::function<void(const SolutionPath&, std::uint64_t)>;

/// Runs samples [first_sample, first_sample + n_samples) in fixed blocks.
/// Each block is accumulated in sample order and blocks are merged in block
/// order, so the result is bit-identical for any worker count.
EnsembleResult run_ensemble(const EnsembleSpec& spec, const PathObserver& observer = {});

int resolve_workers(int requested);

} // namespace sheat
