#include "cmdp_accel/mdp_core.hpp"

#include "cmdp_accel/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace cmdp_accel {

namespace {

std::string shape(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream out;
  out << rows << "x" << cols;
  return out.str();
}

void check_policy_shape(const TabularCmdp& cmdp, const Policy& pi) {
  if (pi.num_states() != cmdp.num_states() || pi.num_actions() != cmdp.num_actions()) {
    throw InvalidInput("policy shape " + shape(pi.num_states(), pi.num_actions()) +
                       " does not match instance " +
                       shape(cmdp.num_states(), cmdp.num_actions()));
  }
}

void check_lambda(const TabularCmdp& cmdp, const Vector& lambda) {
  if (lambda.size() != cmdp.num_constraints()) {
    throw InvalidInput("lambda has " + std::to_string(lambda.size()) +
                       " entries, instance has " +
                       std::to_string(cmdp.num_constraints()) + " constraints");
  }
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (!(lambda[i] >= 0.0)) {
      throw InvalidInput("lambda[" + std::to_string(i) + "] must be >= 0");
    }
  }
}

Matrix identity_minus_discounted(const TabularCmdp& cmdp, const Matrix& chain) {
  const int n = cmdp.num_states();
  return Matrix::Identity(n, n) - cmdp.discount() * chain;
}

// r_pi(s) = sum_a pi(a|s) r(s,a)
Vector policy_reward(const Policy& pi, const Matrix& reward) {
  return pi.probs().cwiseProduct(reward).rowwise().sum();
}

Vector solve_checked(const Matrix& system, const Vector& rhs, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(system);
  Vector x = lu.solve(rhs);
  if (!x.allFinite()) {
    throw SolverError(std::string(what) + ": linear solve produced non-finite values");
  }
  return x;
}

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

}  // namespace

TabularCmdp::TabularCmdp(int num_states, int num_actions, Matrix transition,
                         std::vector<Matrix> rewards, Vector thresholds,
                         double discount, Vector initial_dist, const Tolerances& tol)
    : num_states_(num_states),
      num_actions_(num_actions),
      transition_(std::move(transition)),
      rewards_(std::move(rewards)),
      thresholds_(std::move(thresholds)),
      discount_(discount),
      initial_dist_(std::move(initial_dist)) {
  if (num_states_ <= 0) throw InvalidInput("num_states must be positive");
  if (num_actions_ <= 0) throw InvalidInput("num_actions must be positive");
  if (!(discount_ > 0.0 && discount_ < 1.0)) {
    throw InvalidInput("discount must lie in the open interval (0, 1)");
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(num_states_) * num_actions_;
  if (transition_.rows() != rows || transition_.cols() != num_states_) {
    throw InvalidInput("transition must have shape " + shape(rows, num_states_) +
                       " (state-action rows), got " +
                       shape(transition_.rows(), transition_.cols()));
  }
  for (int s = 0; s < num_states_; ++s) {
    for (int a = 0; a < num_actions_; ++a) {
      const auto row = transition_.row(row_index(s, a));
      if (!row.allFinite() || row.minCoeff() < 0.0) {
        throw InvalidInput("transition row (s=" + std::to_string(s) + ", a=" +
                           std::to_string(a) + ") has a negative or non-finite entry");
      }
      if (std::abs(row.sum() - 1.0) > tol.stochastic) {
        throw InvalidInput("transition row (s=" + std::to_string(s) + ", a=" +
                           std::to_string(a) + ") does not sum to 1");
      }
    }
  }
  if (rewards_.empty()) throw InvalidInput("rewards must contain at least the objective r_0");
  if (rewards_.size() != static_cast<size_t>(thresholds_.size()) + 1) {
    throw InvalidInput("expected " + std::to_string(thresholds_.size() + 1) +
                       " reward matrices (objective plus one per threshold), got " +
                       std::to_string(rewards_.size()));
  }
  for (size_t i = 0; i < rewards_.size(); ++i) {
    const Matrix& r = rewards_[i];
    if (r.rows() != num_states_ || r.cols() != num_actions_) {
      throw InvalidInput("reward " + std::to_string(i) + " must have shape " +
                         shape(num_states_, num_actions_));
    }
    if (!r.allFinite() || r.minCoeff() < 0.0) {
      throw InvalidInput("reward " + std::to_string(i) +
                         " must be entrywise finite and >= 0");
    }
  }
  if (!thresholds_.allFinite()) throw InvalidInput("thresholds must be finite");
  if (initial_dist_.size() != num_states_) {
    throw InvalidInput("initial_dist must have length num_states");
  }
  if (!initial_dist_.allFinite() || initial_dist_.minCoeff() < 0.0) {
    throw InvalidInput("initial_dist must be entrywise finite and >= 0");
  }
  if (std::abs(initial_dist_.sum() - 1.0) > tol.stochastic) {
    throw InvalidInput("initial_dist does not sum to 1");
  }
}

const Matrix& TabularCmdp::reward(int i) const {
  if (i < 0 || i > num_constraints()) {
    throw InvalidInput("reward index " + std::to_string(i) + " out of range [0, " +
                       std::to_string(num_constraints()) + "]");
  }
  return rewards_[static_cast<size_t>(i)];
}

Policy::Policy(Matrix probs, const Tolerances& tol) : probs_(std::move(probs)) {
  if (probs_.rows() == 0 || probs_.cols() == 0) throw InvalidInput("policy must be non-empty");
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    const auto row = probs_.row(s);
    if (!row.allFinite() || row.minCoeff() < 0.0) {
      throw InvalidInput("policy row " + std::to_string(s) +
                         " has a negative or non-finite entry");
    }
    if (std::abs(row.sum() - 1.0) > tol.stochastic) {
      throw InvalidInput("policy row " + std::to_string(s) + " does not sum to 1");
    }
  }
}

Policy Policy::uniform(int num_states, int num_actions) {
  return Policy(Matrix::Constant(num_states, num_actions, 1.0 / num_actions));
}

Policy Policy::deterministic(const std::vector<int>& actions, int num_actions) {
  Matrix probs = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), num_actions);
  for (size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= num_actions) {
      throw InvalidInput("action index out of range in deterministic policy");
    }
    probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return Policy(std::move(probs));
}

Policy Policy::softmax(const Matrix& logits, double temperature) {
  if (!(temperature > 0.0)) throw InvalidInput("softmax temperature must be > 0");
  Matrix probs(logits.rows(), logits.cols());
  for (Eigen::Index s = 0; s < logits.rows(); ++s) {
    const double peak = logits.row(s).maxCoeff();
    probs.row(s) = ((logits.row(s).array() - peak) / temperature).exp().matrix();
    probs.row(s) /= probs.row(s).sum();
  }
  return Policy(std::move(probs));
}

RewardStats reward_stats(const TabularCmdp& cmdp) {
  RewardStats stats;
  const int m = cmdp.num_constraints();
  stats.r_max.resize(m + 1);
  for (int i = 0; i <= m; ++i) stats.r_max[i] = cmdp.reward(i).maxCoeff();
  stats.r0_max = stats.r_max[0];
  stats.R_max = m > 0 ? stats.r_max.tail(m).norm() : 0.0;
  return stats;
}

Matrix policy_transition(const TabularCmdp& cmdp, const Policy& pi) {
  check_policy_shape(cmdp, pi);
  const int n = cmdp.num_states();
  const int k = cmdp.num_actions();
  Matrix chain = Matrix::Zero(n, n);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < k; ++a) {
      const double p = pi(s, a);
      if (p != 0.0) chain.row(s) += p * cmdp.transition().row(cmdp.row_index(s, a));
    }
  }
  return chain;
}

OccupancyMeasure occupancy(const TabularCmdp& cmdp, const Policy& pi) {
  const Matrix chain = policy_transition(cmdp, pi);
  const Matrix system = identity_minus_discounted(cmdp, chain.transpose());
  const Vector chi = solve_checked(system, (1.0 - cmdp.discount()) * cmdp.initial_dist(),
                                   "occupancy");
  OccupancyMeasure occ;
  occ.nu = chi.asDiagonal() * pi.probs();
  return occ;
}

Vector occupancy_values(const TabularCmdp& cmdp, const OccupancyMeasure& occ) {
  const int m = cmdp.num_constraints();
  Vector values(m + 1);
  for (int i = 0; i <= m; ++i) {
    values[i] = occ.nu.cwiseProduct(cmdp.reward(i)).sum() / (1.0 - cmdp.discount());
  }
  return values;
}

double value(const TabularCmdp& cmdp, const Policy& pi, int i) {
  const Matrix& r = cmdp.reward(i);
  return occupancy(cmdp, pi).nu.cwiseProduct(r).sum() / (1.0 - cmdp.discount());
}

Vector state_values(const TabularCmdp& cmdp, const Policy& pi, const Matrix& reward) {
  const Matrix chain = policy_transition(cmdp, pi);
  return solve_checked(identity_minus_discounted(cmdp, chain), policy_reward(pi, reward),
                       "policy evaluation");
}

double bellman_value(const TabularCmdp& cmdp, const Policy& pi, int i) {
  return cmdp.initial_dist().dot(state_values(cmdp, pi, cmdp.reward(i)));
}

double entropy_value(const TabularCmdp& cmdp, const Policy& pi) {
  return evaluate(cmdp, pi).entropy;
}

PolicyEvaluation evaluate(const TabularCmdp& cmdp, const Policy& pi) {
  PolicyEvaluation ev;
  ev.occupancy = occupancy(cmdp, pi);
  ev.values = occupancy_values(cmdp, ev.occupancy);
  // -<nu, log pi> written as -sum_s chi(s) sum_a pi log pi so zero-probability
  // actions contribute exactly 0
  const Vector chi = ev.occupancy.state_visitation();
  double h = 0.0;
  for (int s = 0; s < pi.num_states(); ++s) {
    double row = 0.0;
    for (int a = 0; a < pi.num_actions(); ++a) row -= xlogx(pi(s, a));
    h += chi[s] * row;
  }
  ev.entropy = std::max(0.0, h) / (1.0 - cmdp.discount());
  return ev;
}

Matrix combined_reward(const TabularCmdp& cmdp, const Vector& lambda) {
  check_lambda(cmdp, lambda);
  Matrix r = cmdp.reward(0);
  for (int i = 1; i <= cmdp.num_constraints(); ++i) {
    if (lambda[i - 1] != 0.0) r += lambda[i - 1] * cmdp.reward(i);
  }
  return r;
}

double lagrangian_from_values(const TabularCmdp& cmdp, const Vector& values,
                              const Vector& lambda) {
  const int m = cmdp.num_constraints();
  return values[0] + lambda.dot(values.tail(m) - cmdp.thresholds());
}

double regularized_lagrangian(const TabularCmdp& cmdp, const Policy& pi,
                              const Vector& lambda, double tau, double mu) {
  check_lambda(cmdp, lambda);
  if (!(tau >= 0.0)) throw InvalidInput("tau must be >= 0");
  if (!(mu >= 0.0)) throw InvalidInput("mu must be >= 0");
  const PolicyEvaluation ev = evaluate(cmdp, pi);
  return lagrangian_from_values(cmdp, ev.values, lambda) + tau * ev.entropy +
         0.5 * mu * lambda.squaredNorm();
}

Matrix soft_q_eval(const TabularCmdp& cmdp, const Policy& pi, const Vector& lambda,
                   double tau) {
  check_policy_shape(cmdp, pi);
  if (!(tau >= 0.0)) throw InvalidInput("tau must be >= 0");
  const Matrix r = combined_reward(cmdp, lambda);
  Matrix shaped = r;
  if (tau > 0.0) {
    if (pi.probs().minCoeff() <= 0.0) {
      throw InvalidInput("soft_q_eval with tau > 0 needs a strictly positive policy");
    }
    shaped.array() -= tau * pi.probs().array().log();
  }
  const Vector v = state_values(cmdp, pi, shaped);
  const Vector next = cmdp.transition() * v;  // indexed by state-action row
  Matrix q = r;
  for (int s = 0; s < cmdp.num_states(); ++s) {
    for (int a = 0; a < cmdp.num_actions(); ++a) {
      q(s, a) += cmdp.discount() * next[cmdp.row_index(s, a)];
    }
  }
  return q;
}

Policy policy_from_occupancy(const OccupancyMeasure& occ, const Tolerances& tol) {
  const Eigen::Index n = occ.nu.rows();
  const Eigen::Index k = occ.nu.cols();
  Matrix probs(n, k);
  for (Eigen::Index s = 0; s < n; ++s) {
    const double chi = occ.nu.row(s).sum();
    if (chi < tol.support) {
      probs.row(s).setConstant(1.0 / static_cast<double>(k));
    } else {
      probs.row(s) = occ.nu.row(s).cwiseMax(0.0) / chi;
      probs.row(s) /= probs.row(s).sum();
    }
  }
  return Policy(std::move(probs));
}

}  // namespace cmdp_accel
