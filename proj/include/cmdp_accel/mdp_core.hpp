#pragma once

#include <Eigen/Dense>

#include <vector>

namespace cmdp_accel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Numerical acceptance thresholds used by validation and policy extraction.
struct Tolerances {
  double stochastic = 1e-12;  // row sums of kernels, policies and rho
  double occupancy = 1e-10;   // total mass of an occupancy measure
  double support = 1e-14;     // state visitation below this counts as unvisited
};

/**
 * A finite constrained MDP: maximize the discounted value of reward 0 subject
 * to V_i >= c_i for the constraint rewards i = 1..m.
 *
 * The transition kernel is stored as an (|S||A|) x |S| matrix whose row
 * s * |A| + a is the distribution P(.|s,a). Rewards are (m+1) matrices of shape
 * |S| x |A|; rewards[0] is the objective.
 *
 * Construction validates every invariant and throws InvalidInput naming the
 * first one that fails. Instances are immutable afterwards.
 */
class TabularCmdp {
 public:
  TabularCmdp(int num_states, int num_actions, Matrix transition,
              std::vector<Matrix> rewards, Vector thresholds, double discount,
              Vector initial_dist, const Tolerances& tol = {});

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  // m; zero means an unconstrained MDP.
  int num_constraints() const { return static_cast<int>(thresholds_.size()); }
  double discount() const { return discount_; }

  const Matrix& transition() const { return transition_; }
  double transition(int s, int a, int next) const {
    return transition_(row_index(s, a), next);
  }
  int row_index(int s, int a) const { return s * num_actions_ + a; }

  const std::vector<Matrix>& rewards() const { return rewards_; }
  const Matrix& reward(int i) const;
  const Vector& thresholds() const { return thresholds_; }
  const Vector& initial_dist() const { return initial_dist_; }

 private:
  int num_states_;
  int num_actions_;
  Matrix transition_;
  std::vector<Matrix> rewards_;
  Vector thresholds_;
  double discount_;
  Vector initial_dist_;
};

// Stationary randomized policy; row s is the action distribution pi(.|s).
class Policy {
 public:
  explicit Policy(Matrix probs, const Tolerances& tol = {});

  static Policy uniform(int num_states, int num_actions);
  static Policy deterministic(const std::vector<int>& actions, int num_actions);
  // Row-wise softmax of logits / temperature, computed with max subtraction.
  static Policy softmax(const Matrix& logits, double temperature);

  int num_states() const { return static_cast<int>(probs_.rows()); }
  int num_actions() const { return static_cast<int>(probs_.cols()); }
  const Matrix& probs() const { return probs_; }
  double operator()(int s, int a) const { return probs_(s, a); }

 private:
  Matrix probs_;
};

struct OccupancyMeasure {
  Matrix nu;  // discounted state-action visitation, |S| x |A|

  // chi(s) = sum_a nu(s, a)
  Vector state_visitation() const { return nu.rowwise().sum(); }
};

struct RewardStats {
  Vector r_max;        // max entry of each reward, index 0 is the objective
  double r0_max = 0;   // r_max[0]
  double R_max = 0;    // Euclidean norm of r_max[1..m]
};

RewardStats reward_stats(const TabularCmdp& cmdp);

// Induced chain P_pi(s'|s) = sum_a pi(a|s) P(s'|s,a).
Matrix policy_transition(const TabularCmdp& cmdp, const Policy& pi);

// Solves (I - gamma P_pi^T) chi = (1 - gamma) rho by dense LU and returns
// nu(s,a) = chi(s) pi(a|s).
OccupancyMeasure occupancy(const TabularCmdp& cmdp, const Policy& pi);

// V_i^pi(rho) = <nu, r_i> / (1 - gamma), 0 <= i <= m.
double value(const TabularCmdp& cmdp, const Policy& pi, int i);

// Same quantity by the Bellman route: solve (I - gamma P_pi) v = r_pi, return rho^T v.
double bellman_value(const TabularCmdp& cmdp, const Policy& pi, int i);

// Per-state values v = (I - gamma P_pi)^{-1} r_pi for an arbitrary reward.
Vector state_values(const TabularCmdp& cmdp, const Policy& pi, const Matrix& reward);

// Discounted entropy <nu, -log pi> / (1 - gamma), with 0 log 0 = 0.
double entropy_value(const TabularCmdp& cmdp, const Policy& pi);

// One occupancy solve shared by all rewards and the entropy.
struct PolicyEvaluation {
  OccupancyMeasure occupancy;
  Vector values;  // V_0 .. V_m
  double entropy = 0;

  // V_1 .. V_m
  Vector constraint_values() const { return values.tail(values.size() - 1); }
};

PolicyEvaluation evaluate(const TabularCmdp& cmdp, const Policy& pi);

// Values <nu, r_i> / (1 - gamma) for i = 0..m of an arbitrary occupancy measure.
Vector occupancy_values(const TabularCmdp& cmdp, const OccupancyMeasure& occ);

// r_lambda = r_0 + sum_i lambda_i r_i; lambda must be entrywise >= 0.
Matrix combined_reward(const TabularCmdp& cmdp, const Vector& lambda);

// V_0 + <lambda, V - c> + tau H(pi) + (mu / 2) ||lambda||^2
double regularized_lagrangian(const TabularCmdp& cmdp, const Policy& pi,
                              const Vector& lambda, double tau, double mu);

// Unregularized Lagrangian V_0 + <lambda, V - c> from precomputed values.
double lagrangian_from_values(const TabularCmdp& cmdp, const Vector& values,
                              const Vector& lambda);

// Q^pi_{tau,lambda}(s,a) = r_lambda(s,a) + gamma E[v(s')] where v solves the
// entropy-regularized Bellman equation of pi. Requires pi > 0 when tau > 0.
Matrix soft_q_eval(const TabularCmdp& cmdp, const Policy& pi,
                   const Vector& lambda, double tau);

// pi(a|s) = nu(s,a) / chi(s); rows with chi(s) < tol.support become uniform.
Policy policy_from_occupancy(const OccupancyMeasure& occ, const Tolerances& tol = {});

}  // namespace cmdp_accel
