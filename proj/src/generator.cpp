#include "cmdp_accel/generator.hpp"

#include "cmdp_accel/errors.hpp"
#include "cmdp_accel/oracle.hpp"

#include <cmath>
#include <random>
#include <string>

namespace cmdp_accel {

namespace {

constexpr int kMaxAttempts = 10;

TabularCmdp draw(const GeneratorParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = p.num_states;
  const int k = p.num_actions;

  Matrix transition(static_cast<Eigen::Index>(n) * k, n);
  for (Eigen::Index row = 0; row < transition.rows(); ++row) {
    // symmetric Dirichlet(1) via normalized unit exponentials
    for (int next = 0; next < n; ++next) transition(row, next) = -std::log(1.0 - unit(rng));
    transition.row(row) /= transition.row(row).sum();
  }
  std::vector<Matrix> rewards;
  for (int i = 0; i <= p.num_constraints; ++i) {
    Matrix r(n, k);
    for (int s = 0; s < n; ++s) {
      for (int a = 0; a < k; ++a) r(s, a) = unit(rng);
    }
    rewards.push_back(std::move(r));
  }
  const Vector rho = Vector::Constant(n, 1.0 / n);

  const TabularCmdp loose(n, k, transition, rewards, Vector::Zero(p.num_constraints), p.discount,
                          rho);
  Vector thresholds(p.num_constraints);
  for (int i = 1; i <= p.num_constraints; ++i) {
    thresholds[i - 1] = p.threshold_fraction * max_reward_value(loose, i);
  }
  return TabularCmdp(n, k, std::move(transition), std::move(rewards), std::move(thresholds),
                     p.discount, rho);
}

}  // namespace

TabularCmdp gen_random_cmdp(const GeneratorParams& p) {
  if (p.num_states <= 0 || p.num_actions <= 0) {
    throw InvalidInput("generator needs positive state and action counts");
  }
  if (p.num_constraints < 0) throw InvalidInput("generator needs num_constraints >= 0");
  if (!(p.discount > 0.0 && p.discount < 1.0)) throw InvalidInput("discount must lie in (0, 1)");
  if (!(p.threshold_fraction > 0.0 && p.threshold_fraction < 1.0)) {
    throw InvalidInput("threshold_fraction must lie in (0, 1)");
  }
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    TabularCmdp cmdp = draw(p, p.seed + static_cast<std::uint64_t>(attempt));
    if (slater_margin(cmdp) > 0.0) return cmdp;
  }
  throw SolverError("no instance with a positive Slater margin after " +
                    std::to_string(kMaxAttempts) + " draws from seed " + std::to_string(p.seed));
}

TabularCmdp gen_random_cmdp(std::uint64_t seed, int num_states, int num_actions,
                            int num_constraints, double discount, double threshold_fraction) {
  return gen_random_cmdp(
      GeneratorParams{seed, num_states, num_actions, num_constraints, discount, threshold_fraction});
}

}  // namespace cmdp_accel
