#include "cmdp_accel/oracle.hpp"

#include "cmdp_accel/errors.hpp"
#include "cmdp_accel/instance_io.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace cmdp_accel {

namespace {

// Flow rows sum_a nu(s,a) - gamma sum_{s',a'} P(s|s',a') nu(s',a') = (1 - gamma) rho(s)
// over |S||A| occupancy columns followed by `extra_cols` zero columns.
void add_flow_rows(const TabularCmdp& cmdp, Eigen::Index extra_cols, LinearProgram& lp) {
  const int n = cmdp.num_states();
  const int k = cmdp.num_actions();
  const Eigen::Index vars = static_cast<Eigen::Index>(n) * k + extra_cols;
  lp.A = Matrix::Zero(n, vars);
  lp.b = (1.0 - cmdp.discount()) * cmdp.initial_dist();
  lp.sense.assign(static_cast<size_t>(n), ConstraintSense::Equal);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < k; ++a) {
      const int col = cmdp.row_index(s, a);
      lp.A(s, col) += 1.0;
      for (int next = 0; next < n; ++next) {
        lp.A(next, col) -= cmdp.discount() * cmdp.transition(s, a, next);
      }
    }
  }
}

Eigen::Map<const Vector> flat(const Matrix& m) { return {m.data(), m.size()}; }

// Occupancy columns follow the s * |A| + a order; Eigen is column-major, so
// flatten through the transpose.
Vector reward_row(const TabularCmdp& cmdp, int i) {
  const Matrix rt = cmdp.reward(i).transpose();
  return flat(rt);
}

void append_row(LinearProgram& lp, const Vector& row, ConstraintSense sense, double rhs) {
  const Eigen::Index r = lp.A.rows();
  lp.A.conservativeResize(r + 1, Eigen::NoChange);
  lp.A.row(r) = row.transpose();
  lp.b.conservativeResize(r + 1);
  lp.b[r] = rhs;
  lp.sense.push_back(sense);
}

OccupancyMeasure unflatten(const TabularCmdp& cmdp, const Vector& x) {
  OccupancyMeasure occ;
  occ.nu.resize(cmdp.num_states(), cmdp.num_actions());
  for (int s = 0; s < cmdp.num_states(); ++s) {
    for (int a = 0; a < cmdp.num_actions(); ++a) occ.nu(s, a) = x[cmdp.row_index(s, a)];
  }
  return occ;
}

}  // namespace

const SolveCertificate& CmdpLpResult::value() const {
  if (!certificate) throw SolverError("CMDP is infeasible: no policy meets every constraint");
  return *certificate;
}

double max_reward_value(const TabularCmdp& cmdp, int i, const SimplexOptions& options) {
  LinearProgram lp;
  add_flow_rows(cmdp, 0, lp);
  lp.objective = reward_row(cmdp, i);
  const LpSolution sol = solve_lp(lp, options);
  if (sol.status != LpStatus::Optimal) throw SolverError("unconstrained occupancy LP failed");
  return sol.objective / (1.0 - cmdp.discount());
}

double slater_margin(const TabularCmdp& cmdp, const SimplexOptions& options) {
  const int m = cmdp.num_constraints();
  if (m == 0) return std::numeric_limits<double>::infinity();
  const Eigen::Index occ_cols = static_cast<Eigen::Index>(cmdp.num_states()) * cmdp.num_actions();
  const double scale = 1.0 - cmdp.discount();
  LinearProgram lp;
  add_flow_rows(cmdp, 2, lp);  // free margin t = t_plus - t_minus
  for (int i = 1; i <= m; ++i) {
    Vector row = Vector::Zero(occ_cols + 2);
    row.head(occ_cols) = reward_row(cmdp, i);
    row[occ_cols] = -scale;
    row[occ_cols + 1] = scale;
    append_row(lp, row, ConstraintSense::GreaterEqual, scale * cmdp.thresholds()[i - 1]);
  }
  lp.objective = Vector::Zero(occ_cols + 2);
  lp.objective[occ_cols] = 1.0;
  lp.objective[occ_cols + 1] = -1.0;
  const LpSolution sol = solve_lp(lp, options);
  if (sol.status != LpStatus::Optimal) throw SolverError("Slater-margin LP failed");
  return sol.objective;
}

CmdpLpResult solve_cmdp_lp(const TabularCmdp& cmdp, const SimplexOptions& options) {
  const int m = cmdp.num_constraints();
  const double scale = 1.0 - cmdp.discount();
  LinearProgram lp;
  add_flow_rows(cmdp, 0, lp);
  for (int i = 1; i <= m; ++i) {
    append_row(lp, reward_row(cmdp, i), ConstraintSense::GreaterEqual,
               scale * cmdp.thresholds()[i - 1]);
  }
  lp.objective = reward_row(cmdp, 0);
  const LpSolution sol = solve_lp(lp, options);

  CmdpLpResult result;
  if (sol.status == LpStatus::Infeasible) {
    result.status = CmdpLpStatus::Infeasible;
    return result;
  }
  if (sol.status != LpStatus::Optimal) throw SolverError("occupancy LP reported unbounded");

  SolveCertificate cert;
  cert.optimal_occupancy = unflatten(cmdp, sol.x);
  cert.optimal_value = sol.objective / scale;
  cert.dual_objective = sol.dual_objective / scale;
  cert.pivots = sol.pivots;
  const Vector values = occupancy_values(cmdp, cert.optimal_occupancy);
  cert.constraint_values = values.tail(m);
  const Vector flow = lp.A.topRows(cmdp.num_states()) * sol.x - lp.b.head(cmdp.num_states());
  double residual = flow.lpNorm<Eigen::Infinity>();
  for (int i = 0; i < m; ++i) {
    residual = std::max(residual, cmdp.thresholds()[i] - cert.constraint_values[i]);
  }
  cert.feasibility_residual = residual;
  cert.optimal_policy = policy_from_occupancy(cert.optimal_occupancy);
  cert.slater_margin = slater_margin(cmdp, options);
  result.status = CmdpLpStatus::Optimal;
  result.certificate = std::move(cert);
  return result;
}

std::optional<double> enumerate_deterministic(const TabularCmdp& cmdp, double feasibility_tol,
                                              long long max_policies) {
  const int n = cmdp.num_states();
  const int k = cmdp.num_actions();
  double count = std::pow(static_cast<double>(k), n);
  if (count > static_cast<double>(max_policies)) {
    throw InvalidInput("enumerate_deterministic: |A|^|S| = " + std::to_string(count) +
                       " exceeds the guard of " + std::to_string(max_policies) + " policies");
  }
  std::vector<int> actions(static_cast<size_t>(n), 0);
  std::optional<double> best;
  for (;;) {
    const PolicyEvaluation ev = evaluate(cmdp, Policy::deterministic(actions, k));
    bool feasible = true;
    for (int i = 1; i <= cmdp.num_constraints(); ++i) {
      if (ev.values[i] < cmdp.thresholds()[i - 1] - feasibility_tol) feasible = false;
    }
    if (feasible && (!best || ev.values[0] > *best)) best = ev.values[0];
    // odometer increment
    int pos = 0;
    while (pos < n && ++actions[static_cast<size_t>(pos)] == k) actions[static_cast<size_t>(pos++)] = 0;
    if (pos == n) break;
  }
  return best;
}

nlohmann::json certificate_to_json(const CmdpLpResult& result) {
  if (!result.feasible()) return {{"status", "infeasible"}};
  const SolveCertificate& c = *result.certificate;
  return {{"status", "optimal"},
          {"optimal_value", c.optimal_value},
          {"dual_objective", c.dual_objective},
          {"constraint_values", vector_to_json(c.constraint_values)},
          {"feasibility_residual", c.feasibility_residual},
          {"slater_margin", c.slater_margin},
          {"optimal_occupancy", matrix_to_json(c.optimal_occupancy.nu)},
          {"optimal_policy", matrix_to_json(c.optimal_policy.probs())},
          {"pivots", c.pivots}};
}

}  // namespace cmdp_accel
