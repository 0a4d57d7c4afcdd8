#pragma once

#include "cmdp_accel/mdp_core.hpp"

#include <vector>

namespace cmdp_accel {

enum class ConstraintSense { LessEqual, GreaterEqual, Equal };

// maximize objective^T x  subject to  A x (sense) b,  x >= 0
struct LinearProgram {
  Matrix A;
  Vector b;
  std::vector<ConstraintSense> sense;
  Vector objective;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Vector x;
  double objective = 0;
  // Row multipliers y with objective = b^T y at an optimal basis; GE rows carry
  // y <= 0, LE rows y >= 0 under this maximization convention.
  Vector duals;
  double dual_objective = 0;
  long long pivots = 0;
};

struct SimplexOptions {
  double pivot_tol = 1e-10;
  double feasibility_tol = 1e-9;
  long long max_pivots = 5'000'000;
};

// Two-phase dense tableau simplex with Bland's smallest-index rule for both the
// entering and the leaving variable, so degenerate problems cannot cycle. The
// final basic solution is re-solved against the original constraint matrix.
LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

}  // namespace cmdp_accel
