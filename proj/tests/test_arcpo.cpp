#include "cmdp_accel/arcpo.hpp"
#include "cmdp_accel/errors.hpp"
#include "cmdp_accel/experiments.hpp"
#include "cmdp_accel/generator.hpp"
#include "cmdp_accel/oracle.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cmdp_accel;
using namespace testing_support;

namespace {

ArCpoConfig small_config(int T, double B = 5.0) {
  ArCpoConfig c;
  c.T = T;
  c.alpha = 0.3;
  c.q = 0.2;
  c.eta = 0.5;
  c.tau = 0.1;
  c.mu = 0.01;
  c.delta = 1e-4;
  c.B = B;
  return c;
}

// evaluated in long double so the numeric minimizer resolves x to ~1e-10
long double line7(long double x, long double prev, long double under, long double g,
                  long double eta, long double mu) {
  return eta * (g * x + 0.5 * mu * (x - under) * (x - under)) + 0.5 * (x - prev) * (x - prev);
}

}  // namespace

TEST_CASE("dual_grad_estimate examples") {
  std::mt19937_64 rng(1);
  TabularCmdp base = random_cmdp(rng, 4, 3, 2, 0.9);
  const Policy pi = random_policy(rng, 4, 3);
  const Vector v = evaluate(base, pi).constraint_values();
  const TabularCmdp tight(4, 3, base.transition(), base.rewards(), v, 0.9, base.initial_dist());
  CHECK(dual_grad_estimate(tight, pi, Vector::Zero(2), 0.0).cwiseAbs().maxCoeff() == 0.0);

  const Vector g = dual_grad_from_values(Vector::Constant(1, 1.0), Vector::Constant(1, 2.0),
                                         Vector::Constant(1, 2.0), 1.0);
  CHECK(g[0] == doctest::Approx(1.0));

  const Vector under = (Vector(2) << 0.3, 1.7).finished();
  const Vector est = dual_grad_estimate(base, pi, under, 0.25);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(est[i] - (value(base, pi, i + 1) - base.thresholds()[i] + 0.25 * under[i])) <
          1e-12);
  }
}

TEST_CASE("dual_prox_step examples") {
  auto one = [](double x) { return Vector::Constant(1, x); };
  CHECK(dual_prox_step(one(0), one(0), one(-1), 1.0, 0.0, 1.0)[0] == doctest::Approx(1.0));
  CHECK(dual_prox_step(one(0), one(0), one(5), 1.0, 0.0, 1.0)[0] == 0.0);
  const double x = dual_prox_step(one(0), one(2), one(0), 1.0, 1.0, 10.0)[0];
  CHECK(x == doctest::Approx(1.0));
  const double oracle = golden_section(
      [](long double y) { return line7(y, 0.0, 2.0, 0.0, 1.0, 1.0); }, 0.0, 20.0);
  CHECK(std::abs(x - oracle) < 1e-8);
  // upper clamp
  CHECK(dual_prox_step(one(1), one(1), one(-100), 1.0, 0.0, 1.0)[0] == 2.0);
}

TEST_CASE("dual_prox_step matches a numeric minimizer on random tuples") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int clamped = 0;
  for (int k = 0; k < 300; ++k) {
    const int m = 1 + k % 3;
    const double B = 0.2 + 2.0 * u(rng), eta = std::pow(10.0, 3 * u(rng) - 2), mu = 2 * u(rng);
    Vector prev(m), under(m), g(m);
    for (int i = 0; i < m; ++i) {
      prev[i] = 2 * B * u(rng);
      under[i] = 2 * B * u(rng);
      g[i] = 10 * u(rng) - 5;
    }
    const Vector x = dual_prox_step(prev, under, g, eta, mu, B);
    for (int i = 0; i < m; ++i) {
      const double ref = golden_section(
          [&](long double y) { return line7(y, prev[i], under[i], g[i], eta, mu); }, 0.0, 2 * B);
      CHECK(std::abs(x[i] - ref) < 1e-8);
      if (x[i] == 0.0 || x[i] == 2 * B) ++clamped;
    }
  }
  CHECK(clamped > 20);
}

TEST_CASE("prox first-order condition at box corners and random points") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const int m = 2;
    const double B = 1.0, eta = 0.7, mu = 0.3;
    Vector prev(m), under(m), g(m);
    for (int i = 0; i < m; ++i) {
      prev[i] = 2 * u(rng);
      under[i] = 2 * u(rng);
      g[i] = 6 * u(rng) - 3;
    }
    const Vector x = dual_prox_step(prev, under, g, eta, mu, B);
    const Vector grad = eta * g + eta * mu * (x - under) + (x - prev);
    std::vector<Vector> probes;
    for (int c = 0; c < 4; ++c) probes.push_back((Vector(2) << 2.0 * (c & 1), 2.0 * (c >> 1)).finished());
    for (int p = 0; p < 100; ++p) probes.push_back((Vector(2) << 2 * u(rng), 2 * u(rng)).finished());
    for (const Vector& l : probes) CHECK(grad.dot(l - x) >= -1e-9);
  }
}

TEST_CASE("output weights") {
  for (int T : {1, 2, 7, 100}) {
    for (double a : {0.01, 0.3, 1.0}) {
      const Vector w = output_weights(T, a);
      CHECK(std::abs(w.sum() - 1.0) < 1e-12);
      CHECK(w[0] == doctest::Approx(std::pow(1 - a, T - 1)));
      if (T > 1) CHECK(w[T - 1] == doctest::Approx(a));
    }
  }
  ArCpoConfig c = small_config(40);
  c.schedule = StepSchedule{StepSchedule::Kind::Diminishing, 0.5, 10};
  CHECK(c.alpha_at(1) == doctest::Approx(0.5));
  CHECK(c.alpha_at(9) == doctest::Approx(0.1));
  CHECK(c.alpha_at(30) == doctest::Approx(0.1));
  CHECK(c.q_at(4) == c.alpha_at(4));
  CHECK(std::abs(output_weights(c).sum() - 1.0) < 1e-12);
}

TEST_CASE("mix_policies examples") {
  std::mt19937_64 rng(4);
  const TabularCmdp c = random_cmdp(rng, 2, 2, 1, 0.9);
  const Policy p = random_policy(rng, 2, 2);
  const Policy same = mix_policies(c, {p, p, p}, output_weights(3, 0.4));
  CHECK((same.probs() - p.probs()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((mix_policies(c, {p}, output_weights(1, 0.4)).probs() - p.probs()).cwiseAbs().maxCoeff() <
        1e-12);

  const Policy d1 = Policy::deterministic({0, 1}, 2), d2 = Policy::deterministic({1, 0}, 2);
  const Vector w = output_weights(2, 0.5);
  const Policy mixed = mix_policies(c, {d1, d2}, w);
  for (int i = 0; i <= 1; ++i) {
    CHECK(std::abs(value(c, mixed, i) - 0.5 * value(c, d1, i) - 0.5 * value(c, d2, i)) < 1e-10);
  }
  CHECK_THROWS_AS(mix_policies(c, {d1, d2}, Vector::Ones(2)), InvalidInput);
  CHECK_THROWS_AS(mix_policies(c, {d1}, w), InvalidInput);
}

TEST_CASE("run_arcpo with vacuous constraints keeps lambda at 0") {
  std::mt19937_64 rng(5);
  const TabularCmdp base = random_cmdp(rng, 4, 3, 0, 0.9);
  const TabularCmdp c(4, 3, base.transition(),
                      {base.reward(0), Matrix::Zero(4, 3), Matrix::Zero(4, 3)}, Vector::Zero(2),
                      0.9, base.initial_dist());
  ArCpoConfig cfg = small_config(20);
  const ArCpoResult r = run_arcpo(c, cfg);
  for (const auto& rec : r.trace.records) CHECK(rec.lambda.cwiseAbs().maxCoeff() == 0.0);
  const RegpoResult free = regpo_softq(base, Vector(0), cfg.tau, cfg.delta, reward_stats(c), cfg.B);
  CHECK((r.policy.probs() - free.policy.probs()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("run_arcpo with T = 1 returns the first RegPO policy at lambda 0") {
  std::mt19937_64 rng(6);
  const TabularCmdp c = random_cmdp(rng, 4, 3, 2, 0.9, 2.0);
  ArCpoConfig cfg = small_config(1);
  const ArCpoResult r = run_arcpo(c, cfg);
  const RegpoResult first =
      regpo_softq(c, Vector::Zero(2), cfg.tau, cfg.delta, reward_stats(c), cfg.B);
  CHECK((r.policy.probs() - first.policy.probs()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(r.trace.records.size() == 1);
  CHECK(r.trace.records[0].lambda_under.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run_arcpo invariants: box, trace shape, mixed-policy identity, replay") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 5; ++k) {
    const TabularCmdp c = gen_random_cmdp(100 + k, 5, 3, 2, 0.9, 0.7);
    ArCpoConfig cfg = small_config(60, 1.0);
    cfg.eta = 5.0;  // large steps so the box clamp engages
    cfg.keep_iterates = true;
    const ArCpoResult r = run_arcpo(c, cfg);
    REQUIRE(r.trace.records.size() == 60);
    long long calls = 0;
    for (const auto& rec : r.trace.records) {
      CHECK(rec.oracle_calls >= calls);
      calls = rec.oracle_calls;
      CHECK(rec.lambda.minCoeff() >= 0.0);
      CHECK(rec.lambda.maxCoeff() <= 2.0 * cfg.B);
      CHECK(rec.lambda_under.minCoeff() >= 0.0);
      CHECK(rec.lambda_under.maxCoeff() <= 2.0 * cfg.B + 1e-15);
    }
    CHECK(r.final_iterates.lambda_bar.maxCoeff() <= 2.0 * cfg.B + 1e-15);

    const Vector mixed = evaluate(c, r.policy).values;
    Vector weighted = Vector::Zero(3);
    for (int t = 0; t < cfg.T; ++t) weighted += r.weights[t] * evaluate(c, r.iterates[t]).values;
    CHECK((mixed - weighted).cwiseAbs().maxCoeff() <= 1e-8);
    // running mixture reported in the trace is the same quantity
    CHECK(std::abs(r.trace.records.back().mixed_V0 - mixed[0]) <= 1e-8);

    const ArCpoResult again = run_arcpo(c, cfg);
    CHECK(again.policy.probs() == r.policy.probs());
    CHECK(again.trace.records.back().lambda == r.trace.records.back().lambda);
  }
}

TEST_CASE("diagnostics shrink with delta") {
  // deterministic ring transitions mix slowly, so truncated soft Q iteration
  // leaves a visible policy error
  const int n = 4, k = 2;
  Matrix P = Matrix::Zero(n * k, n);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < k; ++a) P(s * k + a, (s + a + 1) % n) = 1.0;
  }
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix r0(n, k), r1(n, k);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < k; ++a) {
      r0(s, a) = u(rng);
      r1(s, a) = u(rng);
    }
  }
  const TabularCmdp c(n, k, P, {r0, r1}, Vector::Constant(1, 7.0), 0.9,
                      Vector::Constant(n, 1.0 / n));
  ArCpoConfig cfg = small_config(10);
  cfg.eta = 5.0;
  cfg.diagnostics = true;
  cfg.delta = 3.0;
  const ArCpoResult coarse = run_arcpo(c, cfg);
  cfg.delta = 1e-7;
  const ArCpoResult fine = run_arcpo(c, cfg);
  double worst_coarse = 0, worst_fine = 0;
  for (size_t t = 0; t < 10; ++t) {
    CHECK(std::isfinite(coarse.trace.records[t].grad_error_norm));
    // Delta_t uses the unregularized Lagrangian, so only its size is checked
    CHECK(std::isfinite(coarse.trace.records[t].lagrangian_gap));
    CHECK(std::abs(fine.trace.records[t].lagrangian_gap) < 1e-6);
    worst_coarse = std::max(worst_coarse, coarse.trace.records[t].grad_error_norm);
    worst_fine = std::max(worst_fine, fine.trace.records[t].grad_error_norm);
  }
  MESSAGE("gradient error: delta 3 -> " << worst_coarse << ", delta 1e-7 -> " << worst_fine);
  CHECK(worst_fine < worst_coarse);
  CHECK(worst_fine < 1e-5);
  CHECK(std::isnan(run_arcpo(c, small_config(2)).trace.records[0].grad_error_norm));
}

TEST_CASE("theorem1_params") {
  const StepSizes s = theorem1_params(2.0, 4.0);
  CHECK(s.alpha == doctest::Approx(0.5));
  CHECK(s.q == doctest::Approx(1.0 / 3.0));
  CHECK(s.eta == doctest::Approx(0.5));
  const StepSizes b = theorem1_params(3.0, 3.0);
  CHECK(b.alpha == doctest::Approx(std::sqrt(0.5)));
  CHECK(b.q == doctest::Approx(2 * std::sqrt(0.5) - 1.0));
  CHECK(b.eta == doctest::Approx(std::sqrt(0.5) / (3.0 * (1 - std::sqrt(0.5)))));
  double prev = 1.0;
  for (double L = 1.0; L < 1e8; L *= 3.0) {
    const StepSizes x = theorem1_params(1.0, L);
    CHECK(x.alpha < prev);
    CHECK(x.q >= 0.0);
    CHECK(x.q <= x.alpha);
    prev = x.alpha;
  }
  CHECK(prev < 1e-3);
  CHECK_THROWS_AS(theorem1_params(0.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(theorem1_params(2.0, 1.0), InvalidInput);

  ArCpoConfig cfg = small_config(5);
  const StepSizes t = theorem1_params(cfg.mu, 0.4);
  cfg.alpha = t.alpha;
  cfg.q = t.q;
  cfg.eta = t.eta;
  cfg.theorem_L_d = 0.4;
  CHECK_NOTHROW(cfg.validate());
  cfg.eta *= 1.01;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("corollary regularization arithmetic") {
  const TabularCmdp two = bandit({{1, 0}, {0, 1}}, {0.5}, 0.5);
  const RegularizationChoice r = corollary1_regularization(two, reward_stats(two), 0.1, 2.0);
  CHECK(std::abs(r.tau - 0.1 / std::log(2.0)) < 1e-12);
  CHECK(std::abs(r.tau - 0.14427) < 1e-5);
  const RegularizationChoice s = corollary1_regularization(two, reward_stats(two), 0.06, 2.0);
  CHECK(s.B == doctest::Approx(1.0));
  CHECK(std::abs(s.mu - 0.01) < 1e-15);
  CHECK_THROWS_AS(corollary1_regularization(two, reward_stats(two), 0.1, 0.0), InvalidInput);
  const TabularCmdp single = bandit({{1}}, {}, 0.5);
  const RegularizationChoice f = corollary1_regularization(single, reward_stats(single), 0.1, 1.0);
  CHECK(f.tau == 0.1);
  CHECK(f.mu_fallback);
}

TEST_CASE("corollary schedule on the binding bandit") {
  const TabularCmdp b = binding_bandit();
  const SolveCertificate cert = solve_cmdp_lp(b).value();
  const double eps = 0.05;
  const RewardStats st = reward_stats(b);
  const RegularizationChoice reg = corollary1_regularization(b, st, eps, cert.slater_margin);
  Corollary1Inputs in;
  in.epsilon = eps;
  in.slater_margin = cert.slater_margin;
  in.L_d = 2.0 * estimate_dual_smoothness(b, reg.tau, reg.mu, 20, reg.B, 1);
  in.dual_lower_bound = cert.optimal_value;
  const Corollary1Schedule sch = corollary1_schedule(b, st, in);
  CHECK(sch.config.theorem_L_d.has_value());
  // the schedule at eps certifies gap <= 5 eps and violation <= 6 eps / B
  const PolicyEvaluation raw = evaluate(b, run_arcpo(b, sch.config).policy);
  MESSAGE("schedule at eps: gap " << cert.optimal_value - raw.values[0] << ", violation "
                                  << constraint_violation(b.thresholds(), raw.constraint_values()));
  CHECK(cert.optimal_value - raw.values[0] <= 5 * eps);
  CHECK(constraint_violation(b.thresholds(), raw.constraint_values()) <= 6 * eps / reg.B);

  // aimed at eps itself
  const TargetPlan plan = plan_arcpo(b, cert, eps);
  const PolicyEvaluation ev = evaluate(b, run_arcpo(b, plan.schedule.config).policy);
  CHECK(cert.optimal_value - ev.values[0] <= eps);
  CHECK(constraint_violation(b.thresholds(), ev.constraint_values()) <= eps);
}

TEST_CASE("smoothness estimator") {
  const TabularCmdp free = bandit({{1, 0}}, {}, 0.5);
  CHECK(estimate_dual_smoothness(free, 0.1, 0.1, 5, 1.0, 0) == 0.0);

  const TabularCmdp c = gen_random_cmdp(4, 5, 3, 1, 0.9, 0.6);
  const double big_tau = 100.0, mu = 1.0;
  const double with_mu = estimate_dual_smoothness(c, big_tau, mu, 10, 2.0, 9);
  const double without = estimate_dual_smoothness(c, big_tau, 0.0, 10, 2.0, 9);
  CHECK(std::abs((with_mu - without) - mu) <= 0.05 * mu);

  const TabularCmdp g = gen_random_cmdp(17, 5, 3, 2, 0.9, 0.6);
  const double e05 = estimate_dual_smoothness(g, 0.05, 0.0, 20, 5.0, 3);
  const double e10 = estimate_dual_smoothness(g, 0.1, 0.0, 20, 5.0, 3);
  const double e20 = estimate_dual_smoothness(g, 0.2, 0.0, 20, 5.0, 3);
  CHECK(e05 > e10);
  CHECK(e10 > e20);
  CHECK(e05 / e20 >= 2.0);
  CHECK(estimate_dual_smoothness(g, 0.1, 0.0, 20, 5.0, 3) == e10);
}

TEST_CASE("dual function and its gradient agree with finite differences") {
  const TabularCmdp c = gen_random_cmdp(5, 4, 3, 2, 0.9, 0.6);
  const Vector lam = (Vector(2) << 0.8, 1.1).finished();
  const double tau = 0.2, mu = 0.05, h = 1e-5;
  const Vector g = exact_dual_gradient(c, lam, tau, mu);
  for (int i = 0; i < 2; ++i) {
    Vector up = lam, down = lam;
    up[i] += h;
    down[i] -= h;
    const double fd = (dual_function(c, up, tau, mu) - dual_function(c, down, tau, mu)) / (2 * h);
    CHECK(std::abs(fd - g[i]) < 1e-6);
  }
}

TEST_CASE("lambda increment envelope (logged)") {
  const TabularCmdp c = gen_random_cmdp(21, 5, 3, 2, 0.9, 0.6);
  const double tau = 0.1, mu = 0.01, B = 5.0;
  const double L = 2.0 * estimate_dual_smoothness(c, tau, mu, 10, B, 0);
  const StepSizes s = theorem1_params(mu, std::max(L, mu));
  ArCpoConfig cfg;
  cfg.T = 200;
  cfg.alpha = s.alpha;
  cfg.q = s.q;
  cfg.eta = s.eta;
  cfg.tau = tau;
  cfg.mu = mu;
  cfg.delta = 1e-10;
  cfg.B = B;
  const ArCpoResult r = run_arcpo(c, cfg);
  const auto& rec = r.trace.records;
  int violations = 0;
  double env_prev = 1e300;
  for (size_t t = 5; t < rec.size(); ++t) {
    double env = 0.0;
    for (size_t s2 = t; s2 < rec.size(); ++s2) env = std::max(env, rec[s2].lambda_step_norm);
    if (env > env_prev + 1e-12) ++violations;
    env_prev = env;
  }
  MESSAGE("increment envelope increases after burn-in: " << violations);
  CHECK(violations <= 1);
}

TEST_CASE("config validation") {
  const TabularCmdp c = binding_bandit();
  ArCpoConfig cfg = small_config(3);
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(run_arcpo(c, cfg), InvalidInput);
  cfg = small_config(3);
  cfg.q = 0.5;  // q > alpha
  CHECK_THROWS_AS(run_arcpo(c, cfg), InvalidInput);
  cfg = small_config(0);
  CHECK_THROWS_AS(run_arcpo(c, cfg), InvalidInput);
  cfg = small_config(3);
  cfg.tau = 0.0;
  CHECK_THROWS_AS(run_arcpo(c, cfg), InvalidInput);
}
