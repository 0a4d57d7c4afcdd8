#pragma once

#include "cmdp_accel/mdp_core.hpp"

#include <cmath>
#include <optional>
#include <string_view>

namespace cmdp_accel {

enum class InnerSolver { SoftQ, Npg };

std::string_view to_string(InnerSolver solver);
InnerSolver inner_solver_from_string(std::string_view name);

enum class StopMode {
  Budget,   // exactly the iteration count from the accuracy formula
  Adaptive  // stop once ||Q - T(Q)||_inf <= (1 - gamma) delta tau / 2
};

struct RegpoOptions {
  StopMode stop = StopMode::Budget;
  // Adaptive mode never runs more than this many operator applications.
  long long max_iterations = 1'000'000;
  // Starting Q for SoftQ; Q_0 = 0 when empty. Ignored by NPG.
  std::optional<Matrix> warm_start;
};

struct RegpoResult {
  Policy policy;
  Matrix q_values;            // policy is exactly softmax(q_values / tau)
  long long iterations_used = 0;
  long long oracle_calls = 0;  // soft Bellman applications or policy evaluations
  double sup_norm_residual = 0;  // ||Q - T(Q)||_inf at the returned Q
};

// Iteration count that makes ||pi_K - pi*||_inf <= delta:
//   ceil( log(2 (r0_max + B R_max) / ((1 - gamma) delta tau)) / log(1 / gamma) ),
// clamped below at 0. Throws InvalidInput above 1e9 iterations.
long long regpo_iteration_budget(double discount, const RewardStats& stats, double tau,
                                 double delta, double B);

template <typename Scalar>
using MatrixOf = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorOf = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Scalar-generic operator; the double overloads below are this template.
// Long double is for checks that need to resolve contraction ratios once
// ||Q_k - Q*|| is within a few thousand ulps of |Q|.
template <typename Scalar>
VectorOf<Scalar> soft_state_values_as(const MatrixOf<Scalar>& q, Scalar tau) {
  using std::exp;
  using std::log;
  VectorOf<Scalar> v(q.rows());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    const Scalar peak = q.row(s).maxCoeff();
    Scalar total = 0;
    for (Eigen::Index a = 0; a < q.cols(); ++a) total += exp((q(s, a) - peak) / tau);
    v[s] = peak + tau * log(total);
  }
  return v;
}

template <typename Scalar>
MatrixOf<Scalar> soft_bellman_as(const TabularCmdp& cmdp, const MatrixOf<Scalar>& reward,
                                 Scalar tau, const MatrixOf<Scalar>& q) {
  const VectorOf<Scalar> next =
      cmdp.transition().template cast<Scalar>() * soft_state_values_as<Scalar>(q, tau);
  const Scalar gamma = static_cast<Scalar>(cmdp.discount());
  MatrixOf<Scalar> out = reward;
  for (int s = 0; s < cmdp.num_states(); ++s) {
    for (int a = 0; a < cmdp.num_actions(); ++a) {
      out(s, a) += gamma * next[cmdp.row_index(s, a)];
    }
  }
  return out;
}

// (T(Q))(s,a) = r_lambda(s,a) + gamma E_{s'}[ tau log sum_a' exp(Q(s',a') / tau) ]
Matrix soft_bellman(const TabularCmdp& cmdp, const Vector& lambda, double tau, const Matrix& q);

// Same operator with r_lambda precomputed.
Matrix soft_bellman_with_reward(const TabularCmdp& cmdp, const Matrix& reward, double tau,
                                const Matrix& q);

// tau * log sum_a exp(q(s,a) / tau) for every state.
Vector soft_state_values(const Matrix& q, double tau);

// Soft Q iteration from Q_0 = 0 followed by the softmax read-out.
RegpoResult regpo_softq(const TabularCmdp& cmdp, const Vector& lambda, double tau,
                        double delta, const RewardStats& stats, double B,
                        const RegpoOptions& options = {});

// Natural policy gradient with stepsize (1 - gamma) / tau under the softmax
// parameterization, in its closed tabular form pi_{k+1} ∝ exp(Q^{pi_k} / tau).
// Starts from the uniform policy and performs K + 1 exact evaluations.
RegpoResult regpo_npg(const TabularCmdp& cmdp, const Vector& lambda, double tau,
                      double delta, const RewardStats& stats, double B,
                      const RegpoOptions& options = {});

RegpoResult run_regpo(InnerSolver solver, const TabularCmdp& cmdp, const Vector& lambda,
                      double tau, double delta, const RewardStats& stats, double B,
                      const RegpoOptions& options = {});

}  // namespace cmdp_accel
