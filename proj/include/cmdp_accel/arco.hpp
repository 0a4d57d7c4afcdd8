#pragma once

#include "cmdp_accel/arcpo.hpp"
#include "cmdp_accel/mdp_core.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace cmdp_accel {

// min f_0(x) s.t. f_i(x) <= 0, i = 1..m, accessed only through evaluators and
// a Lagrangian minimizer. Strong duality, L-smoothness of the dual function and
// Slater's condition are the caller's contract and are not checked.
struct ConstrainedProblem {
  int dimension = 0;
  int num_constraints = 0;
  std::function<double(const Vector&)> objective;
  std::function<Vector(const Vector&)> constraints;
  // argmin_x f_0(x) + <lambda, f(x)> to accuracy delta
  std::function<Vector(double delta, const Vector& lambda)> lagrangian_minimizer;
  double G = 1.0;  // bound on |f_i| over the iterates of interest
  Vector slater_point;
  double slater_margin = 0.0;  // xi: f_i(slater_point) <= -xi

  void validate() const;
};

struct ArcoConfig {
  int T = 1;
  double alpha = 1.0;
  double q = 1.0;
  double eta = 1.0;
  double mu = 0.0;
  double delta = 1e-8;
  std::optional<double> B;  // defaults to G / xi
  StepSchedule schedule;
  // Record d_mu(bar lambda_t) each iteration (one extra minimizer call).
  bool track_dual = false;
  std::uint64_t seed = 0;  // output sampler
  // When set, K_0 at this point is logged (two extra minimizer calls). The
  // natural choice is the maximizer of d_mu. Ascent form:
  //   K_0(l) = d_mu(l) - d_mu(bar lambda_0) + (alpha / 2)(mu + 1 / eta) ||lambda_0 - l||^2
  std::optional<Vector> reference_lambda;

  double alpha_at(int t) const;
  double q_at(int t) const;
};

// Stepsizes for an L-smooth dual: theorem1_params(mu, L + mu).
StepSizes arco_params(double mu, double L);

struct ArcoRecord {
  int t = 0;
  double objective = 0;   // f_0(x_t)
  Vector constraints;     // f(x_t)
  Vector lambda;
  Vector lambda_under;
  double lambda_step_norm = 0;
  double dual_value = std::numeric_limits<double>::quiet_NaN();  // d_mu(bar lambda_t)
  double expected_objective = 0;   // weighted f_0 if the run stopped at t
  Vector expected_constraints;
};

struct ArcoResult {
  std::vector<Vector> iterates;  // x_1..x_T
  Vector weights;                // sampling probabilities of x_1..x_T
  size_t sampled_index = 0;
  Vector sampled;                // tilde x
  double expected_objective = 0;  // E[f_0(tilde x)]
  Vector expected_constraints;    // E[f(tilde x)]
  std::vector<ArcoRecord> trace;
  DualIterates final_iterates;
  std::optional<double> K0;  // only with reference_lambda
};

ArcoResult run_arco(const ConstrainedProblem& problem, const ArcoConfig& config);

// Inverse-CDF draw of an index from a probability vector.
size_t sample_index(const Vector& weights, std::mt19937_64& rng);

// f_0(x) = x^T Q x / 2 + c^T x,  f(x) = A x - b, with Q symmetric positive definite.
struct QuadraticProblemData {
  Matrix Q;
  Vector c;
  Matrix A;
  Vector b;
  Vector slater_point;
  double G = 1.0;
};

// Exact minimizer x = -Q^{-1}(c + A^T lambda); the dual smoothness constant is
// the largest eigenvalue of A Q^{-1} A^T.
ConstrainedProblem make_quadratic_problem(const QuadraticProblemData& data);
double quadratic_dual_smoothness(const QuadraticProblemData& data);

// JSON layout: { "Q": [[..]], "c": [..], "A": [[..]], "b": [..],
//                "slater_point": [..], "G": float }
QuadraticProblemData quadratic_from_json(const nlohmann::json& doc);
QuadraticProblemData load_quadratic(const std::string& path);

}  // namespace cmdp_accel
