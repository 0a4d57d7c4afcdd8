#include "cmdp_accel/arcpo.hpp"

#include "cmdp_accel/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace cmdp_accel {

namespace {

constexpr double kReferenceDelta = 1e-10;
constexpr int kRefineSteps = 16;

RegpoResult reference_solve(const TabularCmdp& cmdp, const Vector& lambda, double tau,
                            InnerSolver inner) {
  RegpoOptions options;
  options.stop = StopMode::Adaptive;
  // B only enters the budget formula, which adaptive mode does not use
  return run_regpo(inner, cmdp, lambda, tau, kReferenceDelta, reward_stats(cmdp), 1.0, options);
}

void check_finite(const Vector& v, const char* what, int t) {
  if (!v.allFinite()) {
    throw SolverError(std::string(what) + " became non-finite at outer iteration " +
                      std::to_string(t));
  }
}

bool in_unit_interval(double x) { return x > 0.0 && x <= 1.0; }

}  // namespace

void ArCpoConfig::validate() const {
  if (T < 1) throw InvalidInput("T must be >= 1");
  if (!(eta > 0.0)) throw InvalidInput("eta must be > 0");
  if (!(tau > 0.0)) throw InvalidInput("tau must be > 0");
  if (!(mu >= 0.0)) throw InvalidInput("mu must be >= 0");
  if (!(delta > 0.0)) throw InvalidInput("delta must be > 0");
  if (!(B > 0.0)) throw InvalidInput("B must be > 0");
  if (schedule.kind == StepSchedule::Kind::Constant) {
    if (!in_unit_interval(alpha)) throw InvalidInput("alpha must lie in (0, 1]");
    if (!(q >= 0.0 && q <= alpha)) throw InvalidInput("q must lie in [0, alpha]");
  } else {
    if (!in_unit_interval(schedule.s)) throw InvalidInput("schedule s must lie in (0, 1]");
    if (schedule.H < 1) throw InvalidInput("schedule H must be >= 1");
  }
  if (theorem_L_d) {
    if (schedule.kind != StepSchedule::Kind::Constant) {
      throw InvalidInput("theorem-derived stepsizes require the constant schedule");
    }
    if (!(mu > 0.0)) throw InvalidInput("theorem-derived stepsizes require mu > 0");
    const StepSizes expected = theorem1_params(mu, *theorem_L_d);
    if (std::abs(expected.alpha - alpha) > 1e-12 || std::abs(expected.q - q) > 1e-12 ||
        std::abs(expected.eta - eta) > 1e-12 * std::max(1.0, expected.eta)) {
      throw InvalidInput("alpha, q, eta do not match the theorem formulas for L_d = " +
                         std::to_string(*theorem_L_d));
    }
  }
}

double ArCpoConfig::alpha_at(int t) const {
  if (schedule.kind == StepSchedule::Kind::Constant) return alpha;
  return t < schedule.H ? 2.0 * schedule.s / (t + 1) : 2.0 * schedule.s / schedule.H;
}

double ArCpoConfig::q_at(int t) const {
  return schedule.kind == StepSchedule::Kind::Constant ? q : alpha_at(t);
}

Vector dual_grad_from_values(const Vector& constraint_values, const Vector& thresholds,
                             const Vector& lambda_under, double mu) {
  return constraint_values - thresholds + mu * lambda_under;
}

Vector dual_grad_estimate(const TabularCmdp& cmdp, const Policy& pi, const Vector& lambda_under,
                          double mu) {
  if (lambda_under.size() != cmdp.num_constraints()) {
    throw InvalidInput("lambda_under has the wrong dimension");
  }
  if (lambda_under.size() > 0 && lambda_under.minCoeff() < 0.0) {
    throw InvalidInput("lambda_under must be entrywise >= 0");
  }
  return dual_grad_from_values(evaluate(cmdp, pi).constraint_values(), cmdp.thresholds(),
                               lambda_under, mu);
}

Vector dual_prox_step(const Vector& lambda_prev, const Vector& lambda_under, const Vector& g_hat,
                      double eta, double mu, double B) {
  if (!(eta > 0.0)) throw InvalidInput("eta must be > 0");
  if (!(mu >= 0.0)) throw InvalidInput("mu must be >= 0");
  if (!(B > 0.0)) throw InvalidInput("B must be > 0");
  if (lambda_prev.size() != lambda_under.size() || g_hat.size() != lambda_prev.size()) {
    throw InvalidInput("prox step arguments have mismatched dimensions");
  }
  const Vector unconstrained =
      (lambda_prev + eta * mu * lambda_under - eta * g_hat) / (1.0 + eta * mu);
  return unconstrained.cwiseMax(0.0).cwiseMin(2.0 * B);
}

Vector output_weights(const ArCpoConfig& config) {
  Vector w(config.T);
  double tail = 1.0;  // prod_{s > t} (1 - alpha_s)
  for (int t = config.T; t >= 1; --t) {
    w[t - 1] = t == 1 ? tail : config.alpha_at(t) * tail;
    tail *= 1.0 - config.alpha_at(t);
  }
  return w;
}

Vector output_weights(int T, double alpha) {
  ArCpoConfig config;
  config.T = T;
  config.alpha = alpha;
  return output_weights(config);
}

Policy mix_policies(const TabularCmdp& cmdp, const std::vector<Policy>& policies,
                    const Vector& weights) {
  if (policies.empty()) throw InvalidInput("mix_policies needs at least one policy");
  if (weights.size() != static_cast<Eigen::Index>(policies.size())) {
    throw InvalidInput("mix_policies: one weight per policy required");
  }
  if (weights.minCoeff() < 0.0) throw InvalidInput("mix_policies: weights must be >= 0");
  if (std::abs(weights.sum() - 1.0) > 1e-10) {
    throw InvalidInput("mix_policies: weights must sum to 1");
  }
  OccupancyMeasure mixed{Matrix::Zero(cmdp.num_states(), cmdp.num_actions())};
  for (size_t t = 0; t < policies.size(); ++t) {
    const double w = weights[static_cast<Eigen::Index>(t)];
    if (w != 0.0) mixed.nu += w * occupancy(cmdp, policies[t]).nu;
  }
  return policy_from_occupancy(mixed);
}

ArCpoResult run_arcpo(const TabularCmdp& cmdp, const ArCpoConfig& config) {
  config.validate();
  const int m = cmdp.num_constraints();
  const RewardStats stats = reward_stats(cmdp);

  DualIterates it{Vector::Zero(m), Vector::Zero(m), Vector::Zero(m)};
  OccupancyMeasure mixed{Matrix::Zero(cmdp.num_states(), cmdp.num_actions())};
  ArCpoResult result{Policy::uniform(cmdp.num_states(), cmdp.num_actions()), {}, {}, {}, {}, {}};
  result.trace.solver = "arcpo";
  result.trace.records.reserve(static_cast<size_t>(config.T));
  std::optional<Matrix> warm;
  long long calls = 0;

  for (int t = 1; t <= config.T; ++t) {
    const double alpha = config.alpha_at(t);
    const double q = config.q_at(t);
    it.lambda_under = (1.0 - q) * it.lambda_bar + q * it.lambda;
    check_finite(it.lambda_under, "lambda_under", t);

    RegpoOptions options;
    options.stop = config.inner_stop;
    if (config.warm_start && config.inner == InnerSolver::SoftQ) options.warm_start = warm;
    RegpoResult inner = run_regpo(config.inner, cmdp, it.lambda_under, config.tau, config.delta,
                                  stats, config.B, options);
    calls += inner.oracle_calls;
    const PolicyEvaluation ev = evaluate(cmdp, inner.policy);
    check_finite(ev.values, "policy values", t);

    const Vector g = dual_grad_from_values(ev.constraint_values(), cmdp.thresholds(),
                                           it.lambda_under, config.mu);
    const Vector lambda_next = dual_prox_step(it.lambda, it.lambda_under, g, config.eta,
                                              config.mu, config.B);
    check_finite(lambda_next, "lambda", t);

    IterationRecord rec;
    rec.t = t;
    rec.V0 = ev.values[0];
    rec.constraint_values = ev.constraint_values();
    rec.lambda_under = it.lambda_under;
    rec.lambda_step_norm = (lambda_next - it.lambda).norm();
    rec.lambda = lambda_next;
    rec.oracle_calls = calls;

    if (config.diagnostics) {
      const RegpoResult ref = reference_solve(cmdp, it.lambda_under, config.tau, config.inner);
      const PolicyEvaluation ref_ev = evaluate(cmdp, ref.policy);
      rec.grad_error_norm = (ev.constraint_values() - ref_ev.constraint_values()).norm();
      rec.lagrangian_gap = lagrangian_from_values(cmdp, ref_ev.values, it.lambda_under) -
                           lagrangian_from_values(cmdp, ev.values, it.lambda_under);
    }

    it.lambda = lambda_next;
    it.lambda_bar = (1.0 - alpha) * it.lambda_bar + alpha * it.lambda;
    if (t == 1) {
      mixed.nu = ev.occupancy.nu;
    } else {
      mixed.nu = (1.0 - alpha) * mixed.nu + alpha * ev.occupancy.nu;
    }
    const Vector mixed_values = occupancy_values(cmdp, mixed);
    rec.mixed_V0 = mixed_values[0];
    rec.mixed_constraint_values = mixed_values.tail(m);
    result.trace.records.push_back(std::move(rec));

    if (config.warm_start) warm = std::move(inner.q_values);
    if (config.keep_iterates) result.iterates.push_back(inner.policy);
  }

  result.policy = policy_from_occupancy(mixed);
  result.mixed_occupancy = std::move(mixed);
  result.weights = output_weights(config);
  result.final_iterates = std::move(it);
  return result;
}

StepSizes theorem1_params(double mu, double L_d) {
  if (!(mu > 0.0)) throw InvalidInput("theorem stepsizes need mu > 0 (eta is undefined at 0)");
  if (!(L_d >= mu)) throw InvalidInput("theorem stepsizes need L_d >= mu");
  StepSizes out;
  const double ratio = mu / L_d;
  out.alpha = std::sqrt(mu / (2.0 * L_d));
  out.q = (2.0 * out.alpha - ratio) / (2.0 - ratio);
  out.eta = out.alpha / (mu * (1.0 - out.alpha));
  return out;
}

RegularizationChoice corollary1_regularization(const TabularCmdp& cmdp, const RewardStats& stats,
                                               double epsilon, double slater_margin) {
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be > 0");
  if (!(slater_margin > 0.0)) {
    throw InvalidInput("Slater margin must be > 0 (no strictly feasible policy)");
  }
  RegularizationChoice out;
  const double log_actions = std::log(static_cast<double>(cmdp.num_actions()));
  // a single action has no entropy to regularize
  out.tau = log_actions > 0.0 ? epsilon / log_actions : epsilon;
  const double xi = std::isfinite(slater_margin) ? slater_margin : 1.0;
  out.B = std::max(stats.r0_max, 1e-12) / ((1.0 - cmdp.discount()) * xi);
  const int m = cmdp.num_constraints();
  if (m == 0) {
    out.mu = epsilon;
    out.mu_fallback = true;
  } else {
    out.mu = epsilon / (6.0 * m * out.B * out.B);
  }
  return out;
}

Corollary1Schedule corollary1_schedule(const TabularCmdp& cmdp, const RewardStats& stats,
                                       const Corollary1Inputs& in) {
  const RegularizationChoice reg =
      corollary1_regularization(cmdp, stats, in.epsilon, in.slater_margin);
  const double gamma = cmdp.discount();
  const int m = cmdp.num_constraints();
  const double R = stats.R_max;
  const double eps = in.epsilon;

  Corollary1Schedule out;
  out.mu_fallback = reg.mu_fallback;
  const double smooth_scale = 2.0 * R * R / ((1.0 - gamma) * (1.0 - gamma) * reg.tau);
  if (in.L_d) {
    out.L_d = *in.L_d;
    out.L_nu = smooth_scale > 0.0 ? std::max(0.0, out.L_d - reg.mu) / smooth_scale : 1.0;
  } else if (in.L_nu) {
    if (!(*in.L_nu > 0.0)) throw InvalidInput("L_nu must be > 0");
    out.L_nu = *in.L_nu;
    out.L_d = smooth_scale * out.L_nu + reg.mu;
  } else {
    throw InvalidInput("corollary1_schedule needs either L_nu or L_d");
  }
  out.L_d = std::max(out.L_d, reg.mu);
  if (!(out.L_nu > 0.0)) out.L_nu = 1.0;

  const StepSizes steps = theorem1_params(reg.mu, out.L_d);
  const double sqrt_m = std::sqrt(static_cast<double>(m));
  const double spread = 2.0 * R / (1.0 - gamma) + 2.0 * sqrt_m * reg.B / steps.eta;

  // inner accuracy: the larger of the two admissible expressions
  double delta = 0.0;
  const double denom1 = 8.0 * out.L_nu * R * spread * spread * steps.eta * sqrt_m * reg.B;
  if (denom1 > 0.0) delta = std::max(delta, eps * eps / denom1);
  if (stats.r0_max > 0.0) {
    delta = std::max(delta, eps / (out.L_nu * stats.r0_max) *
                                std::sqrt(reg.mu / (2.0 * out.L_d)));
  }
  if (!(delta > 0.0) || !std::isfinite(delta)) delta = eps;

  out.dual_at_zero = dual_function(cmdp, Vector::Zero(m), reg.tau, reg.mu);
  if (in.K0_bound) {
    out.K0_bound = *in.K0_bound;
  } else {
    const double diameter_sq = static_cast<double>(m) * 4.0 * reg.B * reg.B;
    out.K0_bound = out.dual_at_zero - in.dual_lower_bound +
                   0.5 * steps.alpha * (reg.mu + 1.0 / steps.eta) * diameter_sq;
  }

  double horizon = 0.0;
  if (out.K0_bound > 0.0 && spread > 0.0) {
    horizon = 2.0 * std::log(2.0 * std::sqrt(steps.eta * out.K0_bound) * spread / eps);
  }
  if (R > 0.0 && m > 0) {
    horizon = std::max(horizon, std::log(2.0 * std::exp(1.0) * sqrt_m * reg.B * R /
                                         ((1.0 - gamma) * eps)));
  }
  const double T = std::ceil(std::sqrt(2.0 * out.L_d / reg.mu) * horizon);
  if (!(T < 1e9)) throw InvalidInput("schedule requires more than 1e9 outer iterations");

  ArCpoConfig& c = out.config;
  c.T = std::max(1, static_cast<int>(T));
  c.alpha = steps.alpha;
  c.q = steps.q;
  c.eta = steps.eta;
  c.tau = reg.tau;
  c.mu = reg.mu;
  c.delta = delta;
  c.B = reg.B;
  c.inner = in.inner;
  c.theorem_L_d = out.L_d;
  c.validate();
  return out;
}

Vector exact_dual_gradient(const TabularCmdp& cmdp, const Vector& lambda, double tau, double mu,
                           InnerSolver inner) {
  const RegpoResult sol = reference_solve(cmdp, lambda, tau, inner);
  return dual_grad_from_values(evaluate(cmdp, sol.policy).constraint_values(), cmdp.thresholds(),
                               lambda, mu);
}

double dual_function(const TabularCmdp& cmdp, const Vector& lambda, double tau, double mu) {
  const RegpoResult sol = reference_solve(cmdp, lambda, tau, InnerSolver::SoftQ);
  // soft optimal values give V_{r_lambda} + tau H at the regularized optimum
  const double regularized = cmdp.initial_dist().dot(soft_state_values(sol.q_values, tau));
  return regularized - lambda.dot(cmdp.thresholds()) + 0.5 * mu * lambda.squaredNorm();
}

double estimate_dual_smoothness(const TabularCmdp& cmdp, double tau, double mu, int num_pairs,
                                double box_B, std::uint64_t seed, InnerSolver inner) {
  if (!(tau > 0.0)) throw InvalidInput("smoothness estimate needs tau > 0");
  if (!(box_B > 0.0)) throw InvalidInput("smoothness estimate needs B > 0");
  if (num_pairs < 1) throw InvalidInput("smoothness estimate needs at least one pair");
  const int m = cmdp.num_constraints();
  if (m == 0) return 0.0;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double hi = 2.0 * box_B;
  // a quarter of the coordinates land on a face: curvature often peaks at
  // lambda_i = 0, where interior sampling almost never goes
  auto sample_box = [&] {
    Vector v(m);
    for (int i = 0; i < m; ++i) {
      const double r = unit(rng);
      v[i] = r < 0.2 ? 0.0 : r < 0.25 ? hi : hi * unit(rng);
    }
    return v;
  };

  // Bisect each pair: one half always has a secant ratio at least as large as
  // the whole segment, so this homes in on sharp curvature that a pair
  // straddles without landing inside it. Remembers where the steepest secant was.
  double best = 0.0;
  Vector focus = Vector::Constant(m, 0.5 * hi);
  auto refine = [&](Vector a, Vector b, Vector ga, Vector gb) {
    auto note = [&](double ratio, const Vector& x, const Vector& y) {
      if (ratio > best) {
        best = ratio;
        focus = 0.5 * (x + y);
      }
    };
    note((ga - gb).norm() / (a - b).norm(), a, b);
    for (int step = 0; step < kRefineSteps; ++step) {
      const double half = 0.5 * (a - b).norm();
      if (half <= 1e-9 * (1.0 + hi)) break;
      const Vector mid = 0.5 * (a + b);
      const Vector gm = exact_dual_gradient(cmdp, mid, tau, mu, inner);
      const double left = (ga - gm).norm() / half;
      const double right = (gm - gb).norm() / half;
      note(left, a, mid);
      note(right, mid, b);
      if (left >= right) {
        b = mid;
        gb = gm;
      } else {
        a = mid;
        ga = gm;
      }
    }
  };

  auto jitter = [&](const Vector& center, double scale) {
    Vector v = center;
    for (int i = 0; i < m; ++i) v[i] += scale * (2.0 * unit(rng) - 1.0);
    return Vector(v.cwiseMax(0.0).cwiseMin(hi));
  };

  // first half explores the box, second half probes random directions around
  // the steepest spot found so far (the curvature peak is often narrow)
  const int explore = (num_pairs + 1) / 2;
  for (int p = 0; p < num_pairs; ++p) {
    Vector a, b;
    if (p < explore) {
      a = sample_box();
      if (p % 2 == 0) {
        b = sample_box();
      } else {
        // local pair: the sharpest curvature shows up at small separations
        b = jitter(a, hi * std::pow(10.0, -0.5 - 2.5 * unit(rng)));
      }
    } else {
      const double scale = hi * std::pow(10.0, -1.0 - 3.0 * unit(rng));
      a = jitter(focus, scale);
      b = jitter(a, scale);
    }
    if ((a - b).norm() <= 1e-12 * (1.0 + hi)) continue;
    refine(a, b, exact_dual_gradient(cmdp, a, tau, mu, inner),
           exact_dual_gradient(cmdp, b, tau, mu, inner));
  }
  return best;
}

double optimality_gap(double optimal_value, const Vector& values) {
  return optimal_value - values[0];
}

double constraint_violation(const Vector& thresholds, const Vector& constraint_values) {
  return (thresholds - constraint_values).cwiseMax(0.0).sum();
}

void score_trace(RunTrace& trace, const TabularCmdp& cmdp, double optimal_value) {
  if (trace.records.empty()) return;
  const IterationRecord& last = trace.records.back();
  trace.final_gap = optimal_value - last.mixed_V0;
  trace.final_violation = constraint_violation(cmdp.thresholds(), last.mixed_constraint_values);
}

}  // namespace cmdp_accel
