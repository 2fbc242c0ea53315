#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "sheat/errors.hpp"
#include "sheat/stats.hpp"

using namespace sheat;

namespace {

SolutionPath constant_path(double c, int n, double t) {
    SolutionPath p;
    p.grid.n_interior = n;
    p.times = {0.0, t};
    p.values = {std::vector<double>(n, c), std::vector<double>(n, c)};
    return p;
}

} // namespace

TEST_CASE("constant field: pointwise moment is |c|^p with zero variance") {
    const auto path = constant_path(-1.5, 15, 0.5);
    MomentEstimate est(Functional::pointwise(0.5, 3.0), 0.5);
    for (int i = 0; i < 10; ++i) est = accumulate(est, path);
    CHECK(est.n() == 10);
    CHECK(est.mean() == doctest::Approx(std::pow(1.5, 3.0)).epsilon(1e-14));
    CHECK(est.variance() == doctest::Approx(0.0));
    CHECK_FALSE(est.log_domain());
}

TEST_CASE("Lp norm of the unit field is n / (n + 1)") {
    const int n = 31;
    const auto path = constant_path(1.0, n, 0.25);
    for (double p : {2.0, 4.0}) {
        MomentEstimate est(Functional::lp_norm(p), 0.25);
        est = accumulate(est, path);
        CHECK(est.mean() == doctest::Approx(n / (n + 1.0)).epsilon(1e-14));
    }
    CHECK(functional_value(Functional::sup_norm(2.0), path.at(0.25), path.grid) == doctest::Approx(1.0));
}

TEST_CASE("missing observation time and bad orders are rejected") {
    const auto path = constant_path(1.0, 7, 0.25);
    CHECK_THROWS_AS(accumulate(MomentEstimate(Functional::lp_norm(2.0), 0.3), path), DomainError);
    CHECK_THROWS_AS(accumulate(MomentEstimate(Functional::lp_norm(1.0), 0.25), path), DomainError);
    MomentEstimate e(Functional::lp_norm(2.0), 0.25);
    CHECK_THROWS_AS(e.add(-1.0), DomainError);
}

TEST_CASE("second moment of standard normals lies in its interval") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z;
    MomentEstimate est(Functional::pointwise(0.5, 2.0), 1.0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const double v = z(rng);
        est.add(v * v);
    }
    CHECK(std::abs(est.mean() - 1.0) <= 1.96 * std::sqrt(2.0 / n) * 1.5);
    CHECK(est.ci_half_width() == doctest::Approx(1.96 * std::sqrt(2.0 / n)).epsilon(0.1));
}

TEST_CASE("merge: identity, commutativity and shard invariance") {
    std::mt19937_64 rng(11);
    std::lognormal_distribution<double> d(0.0, 1.0);
    std::vector<double> xs(4096);
    for (auto& x : xs) x = d(rng);
    const Functional f = Functional::lp_norm(2.0);

    MomentEstimate whole(f, 0.1);
    for (double x : xs) whole.add(x);

    CHECK(merge(whole, MomentEstimate(f, 0.1)).mean() == whole.mean());
    CHECK(merge(MomentEstimate(f, 0.1), whole).variance() == whole.variance());

    for (int shards : {1, 8, 64}) {
        std::vector<MomentEstimate> parts(shards, MomentEstimate(f, 0.1));
        for (std::size_t i = 0; i < xs.size(); ++i) parts[i % shards].add(xs[i]);
        MomentEstimate fwd(f, 0.1);
        MomentEstimate rev(f, 0.1);
        for (int s = 0; s < shards; ++s) fwd = merge(fwd, parts[s]);
        for (int s = shards - 1; s >= 0; --s) rev = merge(parts[s], rev);
        CHECK(fwd.n() == whole.n());
        CHECK(std::abs(fwd.mean() - whole.mean()) <= 1e-12 * whole.mean());
        CHECK(std::abs(fwd.variance() - whole.variance()) <= 1e-12 * whole.variance());
        CHECK(std::abs(rev.mean() - fwd.mean()) <= 1e-12 * whole.mean());
    }
    CHECK_THROWS_AS(merge(whole, [&] {
                        MomentEstimate o(Functional::sup_norm(2.0), 0.1);
                        o.add(1.0);
                        return o;
                    }()),
                    DomainError);
}

TEST_CASE("log-domain accumulation agrees with the direct estimate") {
    const double shift = 400.0; // exp(400) overflows nothing yet but is past the threshold
    MomentEstimate big(Functional::lp_norm(2.0), 1.0);
    MomentEstimate small(Functional::lp_norm(2.0), 1.0);
    for (double v : {1.0, 2.0, 3.0, 4.0}) {
        big.add_log(shift + std::log(v));
        small.add(v);
    }
    CHECK(big.log_domain());
    CHECK(big.log_mean() - shift == doctest::Approx(std::log(small.mean())).epsilon(1e-12));
    CHECK(big.log_ci_half_width() == doctest::Approx(small.ci_half_width() / small.mean()).epsilon(1e-10));
    MomentEstimate huge(Functional::lp_norm(2.0), 1.0);
    huge.add_log(1000.0);
    huge.add_log(1000.0);
    CHECK(std::isfinite(huge.log_mean()));
    CHECK(huge.log_mean() == doctest::Approx(1000.0));

    // Tiny samples: their squares underflow, so the interval must come from the log sums.
    MomentEstimate tiny(Functional::lp_norm(2.0), 1.0);
    for (double v : {1.0, 2.0, 3.0, 4.0}) tiny.add(1e-233 * v);
    CHECK(tiny.log_domain());
    CHECK(tiny.log_mean() - std::log(1e-233) == doctest::Approx(std::log(small.mean())).epsilon(1e-12));
    CHECK(tiny.log_ci_half_width() == doctest::Approx(small.ci_half_width() / small.mean()).epsilon(1e-10));
}

TEST_CASE("p-energy and its delta-method interval") {
    MomentEstimate est(Functional::lp_norm(2.0), 1.0);
    for (double v : {3.0, 5.0, 3.0, 5.0}) est.add(v);
    const auto e = p_energy(est);
    CHECK(e.value == doctest::Approx(2.0));
    CHECK(e.ci_half_width == doctest::Approx(est.ci_half_width() * std::pow(4.0, -0.5) / 2.0));

    MomentEstimate zero(Functional::lp_norm(2.0), 1.0);
    zero.add(0.0);
    zero.add(0.0);
    CHECK_THROWS_AS(p_energy(zero), NumericalError);
    MomentEstimate pw(Functional::pointwise(0.5, 2.0), 1.0);
    pw.add(1.0);
    pw.add(1.0);
    CHECK_THROWS_AS(p_energy(pw), DomainError);
    MomentEstimate one(Functional::lp_norm(2.0), 1.0);
    one.add(1.0);
    CHECK_THROWS_AS(p_energy(one), DomainError);
}
