#include "sheat/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "sheat/errors.hpp"

namespace sheat {

namespace {

struct Block {
    std::vector<MomentEstimate> estimates;
    std::vector<std::vector<double>> sum;    // per-block Welford mean of u
    std::vector<std::vector<double>> m2;
    std::uint64_t n = 0;
};

Block empty_block(const EnsembleSpec& spec) {
    Block b;
    const auto& times = spec.sim.observation_times;
    for (const auto& f : spec.functionals) {
        for (double t : times) b.estimates.emplace_back(f, t);
    }
    const auto n = static_cast<std::size_t>(spec.sim.params.grid.n_interior);
    b.sum.assign(times.size(), std::vector<double>(n, 0.0));
    b.m2.assign(times.size(), std::vector<double>(n, 0.0));
    return b;
}

void absorb(Block& b, const SolutionPath& path) {
    for (auto& e : b.estimates) e = accumulate(std::move(e), path);
    ++b.n;
    const double inv = 1.0 / static_cast<double>(b.n);
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        const auto& u = path.values[k];
        for (std::size_t j = 0; j < u.size(); ++j) {
            const double d = u[j] - b.sum[k][j];
            b.sum[k][j] += d * inv;
            b.m2[k][j] += d * (u[j] - b.sum[k][j]);
        }
    }
}

void combine(Block& into, const Block& b) {
    if (b.n == 0) return;
    for (std::size_t i = 0; i < into.estimates.size(); ++i) into.estimates[i].merge(b.estimates[i]);
    const double na = static_cast<double>(into.n);
    const double nb = static_cast<double>(b.n);
    const double n = na + nb;
    for (std::size_t k = 0; k < into.sum.size(); ++k) {
        for (std::size_t j = 0; j < into.sum[k].size(); ++j) {
            const double d = b.sum[k][j] - into.sum[k][j];
            into.sum[k][j] += d * nb / n;
            into.m2[k][j] += b.m2[k][j] + d * d * na * nb / n;
        }
    }
    into.n += b.n;
}

} // namespace

void EnsembleSpec::validate() const {
    sim.validate();
    if (functionals.empty()) throw DomainError("ensemble needs at least one functional");
    for (const auto& f : functionals) f.validate();
    if (n_samples == 0) throw DomainError("ensemble needs n_samples >= 1");
    if (block_size == 0) throw DomainError("block_size must be positive");
    if (workers < 0) throw DomainError("workers must be >= 0");
}

const MomentEstimate& EnsembleResult::get(const Functional& f, double t) const {
    for (const auto& e : estimates) {
        if (e.functional() == f && std::abs(e.t() - t) <= 1e-9 * std::max(1.0, t)) return e;
    }
    throw DomainError("no estimate for " + f.name() + " at the requested time");
}

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

EnsembleResult run_ensemble(const EnsembleSpec& spec, const PathObserver& observer) {
    spec.validate();
    const std::uint64_t n_blocks = (spec.n_samples + spec.block_size - 1) / spec.block_size;
    std::vector<Block> blocks(n_blocks);
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;

    auto work = [&] {
        for (;;) {
            const std::uint64_t bi = next.fetch_add(1);
            if (bi >= n_blocks) return;
            {
                std::lock_guard lk(failure_mu);
                if (failure) return;
            }
            try {
                Block b = empty_block(spec);
                const std::uint64_t lo = spec.first_sample + bi * spec.block_size;
                const std::uint64_t hi =
                    std::min(lo + spec.block_size, spec.first_sample + spec.n_samples);
                for (std::uint64_t s = lo; s < hi; ++s) {
                    const SolutionPath path = simulate_path(spec.sim, s);
                    if (observer) observer(path, s);
                    absorb(b, path);
                }
                blocks[bi] = std::move(b);
            } catch (...) {
                std::lock_guard lk(failure_mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const int workers = std::min<std::uint64_t>(resolve_workers(spec.workers), n_blocks);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    Block total = empty_block(spec);
    for (const auto& b : blocks) combine(total, b);

    EnsembleResult r;
    r.estimates = std::move(total.estimates);
    r.times = spec.sim.observation_times;
    r.n_samples = total.n;
    r.mean_field = total.sum;
    r.mean_se = total.m2;
    for (auto& row : r.mean_se) {
        for (double& v : row) {
            v = total.n > 1 ? std::sqrt(v / static_cast<double>(total.n - 1) / static_cast<double>(total.n))
                            : 0.0;
        }
    }
    return r;
}

} // namespace sheat
