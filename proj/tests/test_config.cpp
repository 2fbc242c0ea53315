#include "doctest.h"

#include <cstdlib>

#include "sheat/config.hpp"
#include "sheat/errors.hpp"

using namespace sheat;

TEST_CASE("defaults validate and round-trip through ini") {
    ExperimentConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.lambdas = {0.1, 1.0 / 3.0, 2.5};
    cfg.dt = 1e-4 / 3.0 * 3.0;
    cfg.betas = {-1.0, 0.1};
    cfg.functionals = {"sup_norm"};
    cfg.error_estimate = false;
    cfg.master_seed = 18446744073709551615ull;
    const auto back = parse_config(to_ini(cfg));
    CHECK(back.lambdas == cfg.lambdas);
    CHECK(back.dt == cfg.dt);
    CHECK(back.betas == cfg.betas);
    CHECK(back.functionals == cfg.functionals);
    CHECK(back.error_estimate == false);
    CHECK(back.master_seed == cfg.master_seed);
    CHECK(to_ini(back) == to_ini(cfg));
}

TEST_CASE("parse reads sections and lists") {
    const auto cfg = parse_config(
        "[model]\nlambdas = 1, 2 ,4\nboundary = neumann\n"
        "[grid]\nn_interior = 63\ndt = 0.001\nhorizon = 0.5\n"
        "[moments]\np = 2,4\nfunctionals = pointwise\n");
    CHECK(cfg.lambdas == std::vector<double>{1, 2, 4});
    CHECK(cfg.boundary == Boundary::Neumann);
    CHECK(cfg.n_interior == 63);
    CHECK(cfg.functional_list().size() == 2);
    const auto ts = cfg.resolved_times();
    REQUIRE(ts.size() == 10);
    CHECK(ts.back() == doctest::Approx(0.5));
    const auto sim = cfg.simulation(2.0);
    CHECK(sim.params.lambda == 2.0);
    CHECK_NOTHROW(sim.validate());
    const auto orc = cfg.oracle(2.0);
    CHECK(orc.t_grid.front() == 0.0);
    CHECK(orc.t_grid.back() == doctest::Approx(0.5));
    CHECK_NOTHROW(orc.validate());
}

TEST_CASE("bad input raises ConfigError") {
    CHECK_THROWS_AS(parse_config("[model]\nfoo = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[nosuch]\nnu = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nnu = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nnu = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nboundary = periodic\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[grid]\ndt = 0.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[simulation]\nobservation_times = 0.00015\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[moments]\np = 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[moments]\nfunctionals = energy\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[oracle]\nerror_estimate = maybe\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), ConfigError);
    ExperimentConfig cfg;
    cfg.sigma = "linear_plus_sine";
    CHECK_THROWS_AS(cfg.oracle(1.0), ConfigError);
}

TEST_CASE("overrides and seed precedence") {
    ExperimentConfig cfg;
    apply_override(cfg, "grid.dt=0.0005");
    CHECK(cfg.dt == 0.0005);
    apply_override(cfg, "model.lambdas = 3,5");
    CHECK(cfg.lambdas == std::vector<double>{3, 5});
    CHECK_THROWS_AS(apply_override(cfg, "grid.dt"), ConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "grid.nope=1"), ConfigError);

    cfg.master_seed = 7;
    ::unsetenv("SHEAT_SEED");
    resolve_seed(cfg, std::nullopt);
    CHECK(cfg.master_seed == 7);
    ::setenv("SHEAT_SEED", "11", 1);
    resolve_seed(cfg, std::nullopt);
    CHECK(cfg.master_seed == 11);
    resolve_seed(cfg, 13);
    CHECK(cfg.master_seed == 13);
    ::setenv("SHEAT_SEED", "x1", 1);
    CHECK_THROWS_AS(resolve_seed(cfg, std::nullopt), ConfigError);
    ::unsetenv("SHEAT_SEED");
    CHECK(config_keys().size() > 40);
}
