#include "cmdp_accel/baseline_pdo.hpp"

#include "cmdp_accel/errors.hpp"

#include <algorithm>
#include <string>

namespace cmdp_accel {

void PdoConfig::validate() const {
  if (T < 1) throw InvalidInput("PDO needs T >= 1");
  if (!(eta > 0.0)) throw InvalidInput("PDO needs eta > 0");
  if (!(tau > 0.0)) throw InvalidInput("PDO needs tau > 0");
  if (!(delta > 0.0)) throw InvalidInput("PDO needs delta > 0");
  if (!(B > 0.0)) throw InvalidInput("PDO needs B > 0");
  if (max_oracle_calls < 0) throw InvalidInput("max_oracle_calls must be >= 0");
}

PdoResult run_pdo(const TabularCmdp& cmdp, const PdoConfig& config) {
  config.validate();
  const int m = cmdp.num_constraints();
  const RewardStats stats = reward_stats(cmdp);

  Vector lambda = Vector::Zero(m);
  OccupancyMeasure running{Matrix::Zero(cmdp.num_states(), cmdp.num_actions())};
  PdoResult result{Policy::uniform(cmdp.num_states(), cmdp.num_actions()),
                   Policy::uniform(cmdp.num_states(), cmdp.num_actions()), {}, {}};
  result.trace.solver = "pdo";
  long long calls = 0;

  for (int t = 1; t <= config.T; ++t) {
    RegpoOptions options;
    options.stop = config.inner_stop;
    // the budget formula assumes ||lambda|| <= B
    const double bound = std::max(config.B, lambda.norm());
    RegpoResult inner =
        run_regpo(config.inner, cmdp, lambda, config.tau, config.delta, stats, bound, options);
    calls += inner.oracle_calls;
    const PolicyEvaluation ev = evaluate(cmdp, inner.policy);

    Vector next = (lambda - config.eta * (ev.constraint_values() - cmdp.thresholds())).cwiseMax(0.0);
    if (config.project_to_box) next = next.cwiseMin(2.0 * config.B);
    if (!next.allFinite() || !ev.values.allFinite()) {
      throw SolverError("PDO iterate became non-finite at outer iteration " + std::to_string(t));
    }

    running.nu = ((t - 1) * running.nu + ev.occupancy.nu) / static_cast<double>(t);
    const Vector mixed_values = occupancy_values(cmdp, running);

    IterationRecord rec;
    rec.t = t;
    rec.V0 = ev.values[0];
    rec.constraint_values = ev.constraint_values();
    rec.lambda_under = lambda;
    rec.lambda_step_norm = (next - lambda).norm();
    rec.lambda = next;
    rec.oracle_calls = calls;
    rec.mixed_V0 = mixed_values[0];
    rec.mixed_constraint_values = mixed_values.tail(m);
    result.trace.records.push_back(std::move(rec));

    lambda = std::move(next);
    result.last_policy = inner.policy;
    if (config.keep_iterates) result.iterates.push_back(std::move(inner.policy));
    if (config.max_oracle_calls > 0 && calls >= config.max_oracle_calls) break;
  }
  result.mixed_policy = policy_from_occupancy(running);
  return result;
}

}  // namespace cmdp_accel
