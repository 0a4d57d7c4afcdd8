#pragma once

#include "cmdp_accel/mdp_core.hpp"
#include "cmdp_accel/simplex.hpp"

#include <nlohmann/json.hpp>

#include <optional>

namespace cmdp_accel {

// Exact CMDP optimum obtained from the occupancy-measure LP.
struct SolveCertificate {
  double optimal_value = 0;             // V_0^*(rho)
  OccupancyMeasure optimal_occupancy;
  Policy optimal_policy{Matrix::Ones(1, 1)};
  Vector constraint_values;             // V_i of the optimal occupancy, i = 1..m
  double feasibility_residual = 0;      // max flow or constraint violation
  double slater_margin = 0;             // xi^*
  double dual_objective = 0;            // LP dual objective, scaled like optimal_value
  long long pivots = 0;
};

enum class CmdpLpStatus { Optimal, Infeasible };

struct CmdpLpResult {
  CmdpLpStatus status = CmdpLpStatus::Infeasible;
  std::optional<SolveCertificate> certificate;

  bool feasible() const { return status == CmdpLpStatus::Optimal; }
  // Throws SolverError when infeasible.
  const SolveCertificate& value() const;
};

// max <nu, r_0> over occupancy measures with <nu, r_i> >= (1 - gamma) c_i.
CmdpLpResult solve_cmdp_lp(const TabularCmdp& cmdp, const SimplexOptions& options = {});

// Largest t such that some policy has V_i >= c_i + t for every constraint.
// Non-positive values mean Slater's condition fails; +inf when m = 0.
double slater_margin(const TabularCmdp& cmdp, const SimplexOptions& options = {});

// max_pi V_i^pi(rho) ignoring every constraint.
double max_reward_value(const TabularCmdp& cmdp, int i, const SimplexOptions& options = {});

// Best objective value over feasible deterministic policies, or nullopt when
// none is feasible. This is a lower bound on the CMDP optimum once m >= 1.
// Throws InvalidInput when |A|^|S| exceeds max_policies.
std::optional<double> enumerate_deterministic(const TabularCmdp& cmdp,
                                              double feasibility_tol = 1e-10,
                                              long long max_policies = 1'000'000);

nlohmann::json certificate_to_json(const CmdpLpResult& result);

}  // namespace cmdp_accel
