#pragma once

#include "cmdp_accel/arcpo.hpp"
#include "cmdp_accel/mdp_core.hpp"
#include "cmdp_accel/regpo.hpp"

#include <vector>

namespace cmdp_accel {

// Alternating primal-dual baseline: solve the inner problem at lambda_t, then
// lambda_{t+1} = (lambda_t - eta (V^{pi_{t+1}} - c))_+.
struct PdoConfig {
  int T = 1;
  double eta = 0.1;
  // Small entropy weight standing in for an unregularized inner solve.
  double tau = 1e-3;
  double delta = 1e-6;
  InnerSolver inner = InnerSolver::SoftQ;
  StopMode inner_stop = StopMode::Budget;
  // Projection onto [0, 2B]^m when set, the nonnegative orthant otherwise.
  bool project_to_box = false;
  // Box half-radius, and the floor on the lambda bound fed to the inner
  // iteration budget.
  double B = 1.0;
  // Stop early once this many inner-oracle calls have been spent (0 = no limit).
  long long max_oracle_calls = 0;
  bool keep_iterates = false;

  void validate() const;
};

struct PdoResult {
  Policy mixed_policy;  // uniform 1/T occupancy mixture of the iterates
  Policy last_policy;
  RunTrace trace;       // mixed_* fields follow the uniform mixture
  std::vector<Policy> iterates;
};

PdoResult run_pdo(const TabularCmdp& cmdp, const PdoConfig& config);

}  // namespace cmdp_accel
