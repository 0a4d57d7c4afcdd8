#include "cmdp_accel/baseline_pdo.hpp"
#include "cmdp_accel/errors.hpp"
#include "cmdp_accel/experiments.hpp"
#include "cmdp_accel/generator.hpp"
#include "cmdp_accel/oracle.hpp"
#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace cmdp_accel;
using namespace testing_support;

TEST_CASE("PDO with vacuous constraints keeps lambda at 0") {
  std::mt19937_64 rng(1);
  const TabularCmdp base = random_cmdp(rng, 4, 3, 0, 0.9);
  const TabularCmdp c(4, 3, base.transition(), {base.reward(0), Matrix::Zero(4, 3)},
                      Vector::Zero(1), 0.9, base.initial_dist());
  PdoConfig cfg;
  cfg.T = 25;
  const PdoResult r = run_pdo(c, cfg);
  for (const auto& rec : r.trace.records) CHECK(rec.lambda[0] == 0.0);
}

TEST_CASE("PDO with T = 1 is one inner solve at lambda 0") {
  const TabularCmdp c = gen_random_cmdp(2, 4, 3, 2, 0.9, 0.6);
  PdoConfig cfg;
  cfg.T = 1;
  const PdoResult r = run_pdo(c, cfg);
  const RegpoResult first = regpo_softq(c, Vector::Zero(2), cfg.tau, cfg.delta, reward_stats(c), cfg.B);
  CHECK(r.trace.records.size() == 1);
  CHECK(r.trace.records[0].oracle_calls == first.oracle_calls);
  CHECK((r.last_policy.probs() - first.policy.probs()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.mixed_policy.probs() - first.policy.probs()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("PDO iterates stay nonnegative and the projection is exact") {
  const TabularCmdp c = gen_random_cmdp(3, 5, 3, 2, 0.9, 0.7);
  PdoConfig cfg;
  cfg.T = 60;
  cfg.eta = 2.0;
  const PdoResult r = run_pdo(c, cfg);
  Vector prev = Vector::Zero(2);
  for (const auto& rec : r.trace.records) {
    CHECK(rec.lambda.minCoeff() >= 0.0);
    const Vector raw = prev - cfg.eta * (rec.constraint_values - c.thresholds());
    CHECK((rec.lambda - raw.cwiseMax(0.0)).cwiseAbs().maxCoeff() < 1e-12);
    prev = rec.lambda;
  }
  cfg.project_to_box = true;
  cfg.B = 0.1;
  for (const auto& rec : run_pdo(c, cfg).trace.records) CHECK(rec.lambda.maxCoeff() <= 0.2);
}

TEST_CASE("small eta keeps PDO near the unconstrained optimum") {
  const TabularCmdp c = gen_random_cmdp(4, 5, 3, 1, 0.9, 0.7);
  const TabularCmdp free(5, 3, c.transition(), {c.reward(0)}, Vector(0), 0.9, c.initial_dist());
  const double unconstrained = solve_cmdp_lp(free).value().optimal_value;
  double prev_err = 1e300;
  for (double eta : {1e-1, 1e-2, 1e-3, 1e-4}) {
    PdoConfig cfg;
    cfg.T = 10;
    cfg.eta = eta;
    const PdoResult r = run_pdo(c, cfg);
    const double err = std::abs(value(c, r.mixed_policy, 0) - unconstrained);
    CHECK(err <= prev_err + 1e-9);
    prev_err = err;
  }
  CHECK(prev_err < 1e-2);
}

TEST_CASE("PDO oracle budget stops early") {
  const TabularCmdp c = gen_random_cmdp(5, 4, 3, 1, 0.9, 0.6);
  PdoConfig cfg;
  cfg.T = 1000;
  cfg.max_oracle_calls = 1000;
  const PdoResult r = run_pdo(c, cfg);
  CHECK(r.trace.records.size() < 1000);
  CHECK(r.trace.records.back().oracle_calls >= 1000);
  cfg.eta = 0.0;
  CHECK_THROWS_AS(run_pdo(c, cfg), InvalidInput);
}

TEST_CASE("binding bandit head-to-head (logged)") {
  const TabularCmdp b = binding_bandit();
  BenchmarkOptions opt;
  opt.cap_at_arcpo_reach = true;
  const BenchmarkResult r = run_benchmark(b, opt);
  REQUIRE(r.arcpo_reach.has_value());
  std::string line = "AR-CPO reach t=" + std::to_string(r.arcpo_reach->outer_iter) +
                     " calls=" + std::to_string(r.arcpo_reach->oracle_calls);
  for (const PdoGridEntry& e : r.pdo) {
    const auto calls = e.calls_to_reach();
    line += "; eta=" + std::to_string(e.eta) + " " +
            (calls ? std::to_string(*calls) : std::string("not reached"));
  }
  MESSAGE(line);
}
