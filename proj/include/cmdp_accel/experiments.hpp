#pragma once

#include "cmdp_accel/arcpo.hpp"
#include "cmdp_accel/baseline_pdo.hpp"
#include "cmdp_accel/oracle.hpp"
#include "cmdp_accel/trace_io.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cmdp_accel {

// AR-CPO parameters aimed at a target accuracy eps. The corollary schedule
// bounds the gap by 5 eps_s and the violation by 6 eps_s / B, so it is
// instantiated at eps_s = min(eps / 5, eps B / 6). L_d is safety times the
// sampled smoothness estimate; the LP optimum lower-bounds the dual.
struct TargetPlan {
  Corollary1Schedule schedule;
  double target_epsilon = 0;
  double schedule_epsilon = 0;
  double smoothness_estimate = 0;
};

struct PlanOptions {
  int smoothness_pairs = 20;
  double smoothness_safety = 2.0;
  std::uint64_t seed = 0;
  InnerSolver inner = InnerSolver::SoftQ;
};

TargetPlan plan_arcpo(const TabularCmdp& cmdp, const SolveCertificate& certificate,
                      double epsilon, const PlanOptions& options = {});

// First outer iteration whose (mixed or inner) policy has gap <= eps and
// l1 violation <= eps.
struct Reach {
  int outer_iter = 0;
  long long oracle_calls = 0;
};
std::optional<Reach> first_reach(const RunTrace& trace, const Vector& thresholds,
                                 double optimal_value, double epsilon, bool use_mixed = true);

// Log-spaced grid lo, ..., hi with n points (n = 1 gives lo).
std::vector<double> log_grid(double lo, double hi, int n);

struct BenchmarkOptions {
  double epsilon = 0.05;
  int grid_points = 8;
  double eta_min = 1e-3;
  double eta_max = 1.0;
  double pdo_tau = 1e-3;
  std::optional<double> pdo_delta;  // defaults to epsilon
  // Stop every PDO run once it spends the AR-CPO calls-to-reach (when AR-CPO
  // reached), otherwise the full AR-CPO call count.
  bool cap_at_arcpo_reach = false;
  int jobs = 1;
  int stride = 1;
  PlanOptions plan;
};

struct PdoGridEntry {
  double eta = 0;
  std::optional<Reach> reach_mixed;
  std::optional<Reach> reach_last;
  RunTrace trace;
  // min over the mixed and the last-iterate reach
  std::optional<long long> calls_to_reach() const;
};

struct BenchmarkResult {
  double optimal_value = 0;
  TargetPlan plan;
  RunTrace arcpo_trace;
  std::optional<Reach> arcpo_reach;
  std::vector<PdoGridEntry> pdo;  // sorted by eta
  std::optional<double> best_pdo_eta;
  std::optional<long long> best_pdo_calls;
  std::vector<TraceRow> rows;     // sorted, ready for write_trace_csv

  // AR-CPO reached and no PDO stepsize reached with fewer or equal calls.
  bool arcpo_wins() const;
};

BenchmarkResult run_benchmark(const TabularCmdp& cmdp, const BenchmarkOptions& options);

// Default --jobs: CMDP_ACCEL_THREADS if set to a positive integer, else 1.
int default_jobs();

struct SmoothnessPoint {
  double tau = 0;
  double estimate = 0;
};
std::vector<SmoothnessPoint> smoothness_sweep(const TabularCmdp& cmdp,
                                              const std::vector<double>& taus, double mu,
                                              double box_B, int num_pairs, std::uint64_t seed);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  int instances = 5;
  int num_states = 6;
  int num_actions = 3;
  int num_constraints = 2;
  double discount = 0.9;
};

// Invariant suite on seeded instances: occupancy, value identity, entropy
// bounds, soft Bellman contraction, SoftQ/NPG agreement, prox optimality, the
// mixed-policy identity, LP certificate consistency and generator determinism.
std::vector<CheckResult> run_verify(const VerifyOptions& options);

}  // namespace cmdp_accel
