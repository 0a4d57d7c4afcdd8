#pragma once

#include "cmdp_accel/mdp_core.hpp"
#include "cmdp_accel/regpo.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace cmdp_accel {

// Constant (alpha, q) or the heuristic diminishing-then-constant schedule
// alpha_t = q_t = 2s / (t + 1) for t < H, then 2s / H.
struct StepSchedule {
  enum class Kind { Constant, Diminishing };
  Kind kind = Kind::Constant;
  double s = 1.0;
  int H = 1;
};

struct ArCpoConfig {
  int T = 1;
  double eta = 1.0;
  double alpha = 1.0;
  double q = 1.0;
  double tau = 0.1;
  double mu = 0.0;
  double delta = 1e-6;
  double B = 1.0;  // dual box is [0, 2B]^m
  StepSchedule schedule;
  InnerSolver inner = InnerSolver::SoftQ;
  StopMode inner_stop = StopMode::Budget;
  bool warm_start = false;
  // Solve every search point a second time to high accuracy and record the
  // gradient error ||delta_t|| and the Lagrangian gap Delta_t.
  bool diagnostics = false;
  // Keep every iterate policy in the result (memory grows with T).
  bool keep_iterates = false;
  // Set when (alpha, q, eta) came from theorem1_params; validate() then checks
  // the three stepsize formulas against it.
  std::optional<double> theorem_L_d;

  void validate() const;
  double alpha_at(int t) const;
  double q_at(int t) const;
};

struct DualIterates {
  Vector lambda;        // lambda_t
  Vector lambda_bar;    // bar lambda_t
  Vector lambda_under;  // underline lambda_t, the search point
};

// One outer iteration of a primal-dual run. Values refer to the inner
// policy pi_t; "mixed" values to the output policy if the run stopped at t.
struct IterationRecord {
  int t = 0;
  double V0 = 0;
  Vector constraint_values;
  Vector lambda;
  Vector lambda_under;
  double lambda_step_norm = 0;  // ||lambda_t - lambda_{t-1}||_2
  double grad_error_norm = std::numeric_limits<double>::quiet_NaN();
  double lagrangian_gap = std::numeric_limits<double>::quiet_NaN();  // Delta_t
  long long oracle_calls = 0;  // cumulative
  double mixed_V0 = 0;
  Vector mixed_constraint_values;
};

struct RunTrace {
  std::string solver;
  std::vector<IterationRecord> records;
  // Filled by score_trace once an LP certificate is available.
  std::optional<double> final_gap;
  std::optional<double> final_violation;
};

struct ArCpoResult {
  Policy policy;                      // occupancy-weighted output policy
  OccupancyMeasure mixed_occupancy;
  Vector weights;                     // output weights w_1..w_T
  RunTrace trace;
  DualIterates final_iterates;
  std::vector<Policy> iterates;       // only with keep_iterates
};

// V^{pi}(rho) - c + mu * lambda_under, constraint components only.
Vector dual_grad_estimate(const TabularCmdp& cmdp, const Policy& pi,
                          const Vector& lambda_under, double mu);
Vector dual_grad_from_values(const Vector& constraint_values, const Vector& thresholds,
                             const Vector& lambda_under, double mu);

// argmin over [0, 2B]^m of eta [<g, l> + mu/2 ||l - lambda_under||^2] + 1/2 ||l - lambda_prev||^2,
// i.e. clamp((lambda_prev + eta mu lambda_under - eta g) / (1 + eta mu), 0, 2B).
Vector dual_prox_step(const Vector& lambda_prev, const Vector& lambda_under, const Vector& g_hat,
                      double eta, double mu, double B);

// w_1 = prod_{s=2..T} (1 - alpha_s), w_t = alpha_t prod_{s>t} (1 - alpha_s).
Vector output_weights(const ArCpoConfig& config);
Vector output_weights(int T, double alpha);

// pi(a|s) proportional to sum_t w_t nu^{pi_t}(s,a); uniform rows where the
// aggregated visitation is below 1e-14.
Policy mix_policies(const TabularCmdp& cmdp, const std::vector<Policy>& policies,
                    const Vector& weights);

ArCpoResult run_arcpo(const TabularCmdp& cmdp, const ArCpoConfig& config);

struct StepSizes {
  double alpha = 0;
  double q = 0;
  double eta = 0;
};

// alpha = sqrt(mu / (2 L_d)), q = (2 alpha - mu / L_d) / (2 - mu / L_d),
// eta = alpha / (mu (1 - alpha)). Requires mu > 0 and L_d >= mu.
StepSizes theorem1_params(double mu, double L_d);

struct Corollary1Inputs {
  double epsilon = 0.05;
  double slater_margin = 1.0;  // xi
  // Exactly one route to the smoothness constant: L_nu gives
  // L_d = 2 R_max^2 L_nu / ((1 - gamma)^2 tau) + mu; L_d is used as given.
  std::optional<double> L_nu;
  std::optional<double> L_d;
  // Upper bound on K_0(lambda^*); defaults to
  // d(0) - dual_lower_bound + (alpha / 2)(mu + 1 / eta) m (2B)^2.
  std::optional<double> K0_bound;
  double dual_lower_bound = 0.0;
  InnerSolver inner = InnerSolver::SoftQ;
};

struct Corollary1Schedule {
  ArCpoConfig config;
  double L_d = 0;
  double L_nu = 0;
  double K0_bound = 0;
  double dual_at_zero = 0;  // d_{tau,mu}(0)
  bool mu_fallback = false;  // m = 0, mu set to epsilon
};

// Parameter choice for an epsilon-optimal run: tau = eps / log|A|,
// mu = eps / (6 m B^2), B = r0_max / ((1 - gamma) xi), delta and T from the
// complexity bounds, stepsizes from theorem1_params.
Corollary1Schedule corollary1_schedule(const TabularCmdp& cmdp, const RewardStats& stats,
                                       const Corollary1Inputs& inputs);

// tau and mu of the schedule above, before any smoothness constant is known.
struct RegularizationChoice {
  double tau = 0;
  double mu = 0;
  double B = 0;
  bool mu_fallback = false;
};
RegularizationChoice corollary1_regularization(const TabularCmdp& cmdp, const RewardStats& stats,
                                               double epsilon, double slater_margin);

// Largest observed ||grad d(l) - grad d(l')||_2 / ||l - l'||_2 over sampled
// pairs in [0, 2B]^m, with gradients from high-accuracy RegPO solves. The
// each pair is then bisected up to 16 times, keeping the steeper half. The result is a lower bound on
// the true constant.
double estimate_dual_smoothness(const TabularCmdp& cmdp, double tau, double mu, int num_pairs,
                                double box_B, std::uint64_t seed,
                                InnerSolver inner = InnerSolver::SoftQ);

// grad d_{tau,mu}(lambda) = V^{pi*_lambda}(rho) - c + mu lambda from a high-accuracy solve.
Vector exact_dual_gradient(const TabularCmdp& cmdp, const Vector& lambda, double tau, double mu,
                           InnerSolver inner = InnerSolver::SoftQ);

// d_{tau,mu}(lambda) = max_pi L_{tau,mu}(pi, lambda) from a high-accuracy soft Q solve.
double dual_function(const TabularCmdp& cmdp, const Vector& lambda, double tau, double mu);

// Gap V_0^* - V_0 and l1 violation ||(c - V)_+||_1 for a value vector V_0..V_m.
double optimality_gap(double optimal_value, const Vector& values);
double constraint_violation(const Vector& thresholds, const Vector& constraint_values);

// Fills final_gap / final_violation from the last record's mixed values.
void score_trace(RunTrace& trace, const TabularCmdp& cmdp, double optimal_value);

}  // namespace cmdp_accel
