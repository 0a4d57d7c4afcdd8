#include "cmdp_accel/regpo.hpp"

#include "cmdp_accel/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace cmdp_accel {

namespace {

constexpr long long kMaxBudget = 1'000'000'000;

void check_regpo_args(double tau, double delta, double B) {
  if (!(tau > 0.0)) throw InvalidInput("RegPO requires tau > 0");
  if (!(delta > 0.0)) throw InvalidInput("RegPO requires delta > 0");
  if (!(B > 0.0)) throw InvalidInput("RegPO requires B > 0");
}

// Row-wise log softmax of q / tau.
Matrix log_softmax(const Matrix& q, double tau) {
  Matrix out(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    const double peak = q.row(s).maxCoeff();
    const auto shifted = (q.row(s).array() - peak) / tau;
    out.row(s) = (shifted - std::log(shifted.exp().sum())).matrix();
  }
  return out;
}

// Q^pi of the regularized MDP with the policy given in log space, so actions
// whose probability underflows to 0 still evaluate without log(0).
Matrix soft_q_from_log_policy(const TabularCmdp& cmdp, const Matrix& reward,
                              const Policy& pi, const Matrix& log_pi, double tau) {
  const Matrix shaped = reward - tau * log_pi;
  const Vector r_pi = pi.probs().cwiseProduct(shaped).rowwise().sum();
  const Matrix chain = policy_transition(cmdp, pi);
  const int n = cmdp.num_states();
  const Matrix system = Matrix::Identity(n, n) - cmdp.discount() * chain;
  const Vector v = system.partialPivLu().solve(r_pi);
  if (!v.allFinite()) throw SolverError("NPG policy evaluation produced non-finite values");
  const Vector next = cmdp.transition() * v;
  Matrix q = reward;
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < cmdp.num_actions(); ++a) {
      q(s, a) += cmdp.discount() * next[cmdp.row_index(s, a)];
    }
  }
  return q;
}

// Residual targets below this are unreachable in double precision.
double precision_floor(const Matrix& q) {
  return 32.0 * std::numeric_limits<double>::epsilon() * (1.0 + q.cwiseAbs().maxCoeff());
}

double residual(const TabularCmdp& cmdp, const Matrix& reward, double tau, const Matrix& q) {
  return (soft_bellman_with_reward(cmdp, reward, tau, q) - q).cwiseAbs().maxCoeff();
}

}  // namespace

std::string_view to_string(InnerSolver solver) {
  return solver == InnerSolver::SoftQ ? "softq" : "npg";
}

InnerSolver inner_solver_from_string(std::string_view name) {
  if (name == "softq") return InnerSolver::SoftQ;
  if (name == "npg") return InnerSolver::Npg;
  throw InvalidInput("unknown inner solver '" + std::string(name) + "' (expected softq or npg)");
}

long long regpo_iteration_budget(double discount, const RewardStats& stats, double tau,
                                 double delta, double B) {
  check_regpo_args(tau, delta, B);
  const double scale = 2.0 * (stats.r0_max + B * stats.R_max) /
                       ((1.0 - discount) * delta * tau);
  if (!(scale > 1.0)) return 0;  // Q_0 = 0 is already delta-accurate
  const double k = std::ceil(std::log(scale) / std::log(1.0 / discount));
  if (!(k <= static_cast<double>(kMaxBudget))) {
    throw InvalidInput("RegPO would need more than 1e9 iterations; increase delta * tau");
  }
  return static_cast<long long>(k);
}

Vector soft_state_values(const Matrix& q, double tau) { return soft_state_values_as<double>(q, tau); }

Matrix soft_bellman_with_reward(const TabularCmdp& cmdp, const Matrix& reward, double tau,
                                const Matrix& q) {
  if (!(tau > 0.0)) throw InvalidInput("soft Bellman operator requires tau > 0");
  return soft_bellman_as<double>(cmdp, reward, tau, q);
}

Matrix soft_bellman(const TabularCmdp& cmdp, const Vector& lambda, double tau, const Matrix& q) {
  if (!(tau > 0.0)) throw InvalidInput("soft Bellman operator requires tau > 0");
  if (q.rows() != cmdp.num_states() || q.cols() != cmdp.num_actions()) {
    throw InvalidInput("Q must have shape num_states x num_actions");
  }
  return soft_bellman_with_reward(cmdp, combined_reward(cmdp, lambda), tau, q);
}

RegpoResult regpo_softq(const TabularCmdp& cmdp, const Vector& lambda, double tau,
                        double delta, const RewardStats& stats, double B,
                        const RegpoOptions& options) {
  const long long budget = regpo_iteration_budget(cmdp.discount(), stats, tau, delta, B);
  const Matrix reward = combined_reward(cmdp, lambda);
  Matrix q = Matrix::Zero(cmdp.num_states(), cmdp.num_actions());
  if (options.warm_start) {
    if (options.warm_start->rows() != q.rows() || options.warm_start->cols() != q.cols()) {
      throw InvalidInput("warm-start Q has the wrong shape");
    }
    q = *options.warm_start;
  }

  RegpoResult result{Policy::uniform(cmdp.num_states(), cmdp.num_actions()), q, 0, 0, 0.0};
  if (options.stop == StopMode::Budget) {
    for (long long k = 0; k < budget; ++k) q = soft_bellman_with_reward(cmdp, reward, tau, q);
    result.iterations_used = budget;
    result.oracle_calls = budget;
    result.sup_norm_residual = residual(cmdp, reward, tau, q);
  } else {
    const double tol = 0.5 * (1.0 - cmdp.discount()) * delta * tau;
    long long k = 0;
    for (;;) {
      Matrix next = soft_bellman_with_reward(cmdp, reward, tau, q);
      const double res = (next - q).cwiseAbs().maxCoeff();
      result.sup_norm_residual = res;
      if (res <= std::max(tol, precision_floor(next))) break;
      if (k >= options.max_iterations) {
        throw SolverError("adaptive RegPO-SoftQ did not reach the residual target within " +
                          std::to_string(options.max_iterations) + " iterations");
      }
      q = std::move(next);
      ++k;
    }
    result.iterations_used = k;
    // the residual check itself applies the operator once per pass
    result.oracle_calls = k + 1;
  }
  if (!q.allFinite()) throw SolverError("RegPO-SoftQ produced non-finite Q values");
  result.policy = Policy::softmax(q, tau);
  result.q_values = std::move(q);
  return result;
}

RegpoResult regpo_npg(const TabularCmdp& cmdp, const Vector& lambda, double tau,
                      double delta, const RewardStats& stats, double B,
                      const RegpoOptions& options) {
  const long long budget = regpo_iteration_budget(cmdp.discount(), stats, tau, delta, B);
  const Matrix reward = combined_reward(cmdp, lambda);
  const int n = cmdp.num_states();
  const int k_actions = cmdp.num_actions();

  Policy pi = Policy::uniform(n, k_actions);
  Matrix log_pi = Matrix::Constant(n, k_actions, -std::log(static_cast<double>(k_actions)));
  Matrix q;
  const double tol = 0.5 * (1.0 - cmdp.discount()) * delta * tau;
  const long long limit = options.stop == StopMode::Budget ? budget : options.max_iterations;
  long long k = 0;
  double res = 0.0;
  for (;; ++k) {
    q = soft_q_from_log_policy(cmdp, reward, pi, log_pi, tau);
    const bool last = k >= limit;
    if (options.stop == StopMode::Adaptive || last) {
      res = residual(cmdp, reward, tau, q);
    }
    log_pi = log_softmax(q, tau);
    pi = Policy(log_pi.array().exp().matrix());
    if (options.stop == StopMode::Adaptive && res <= std::max(tol, precision_floor(q))) break;
    if (last) {
      if (options.stop == StopMode::Adaptive) {
        throw SolverError("adaptive RegPO-NPG did not reach the residual target within " +
                          std::to_string(options.max_iterations) + " iterations");
      }
      break;
    }
  }
  if (!q.allFinite()) throw SolverError("RegPO-NPG produced non-finite Q values");
  return RegpoResult{std::move(pi), std::move(q), k, k + 1, res};
}

RegpoResult run_regpo(InnerSolver solver, const TabularCmdp& cmdp, const Vector& lambda,
                      double tau, double delta, const RewardStats& stats, double B,
                      const RegpoOptions& options) {
  return solver == InnerSolver::SoftQ
             ? regpo_softq(cmdp, lambda, tau, delta, stats, B, options)
             : regpo_npg(cmdp, lambda, tau, delta, stats, B, options);
}

}  // namespace cmdp_accel
