"""Accelerated primal-dual solvers for tabular constrained MDPs.

Thin re-export of the compiled extension. Arrays come back as numpy arrays;
traces are dicts of per-iteration columns.
"""

from ._cmdp_accel import (
    ArCpoConfig,
    InvalidInput,
    PdoConfig,
    Policy,
    SolverError,
    StepSizes,
    TabularCmdp,
    benchmark_csv,
    combined_reward,
    dual_prox_step,
    estimate_dual_smoothness,
    evaluate,
    gen_random_cmdp,
    load_cmdp,
    occupancy,
    plan_arcpo,
    regpo,
    run_arcpo,
    run_pdo,
    save_cmdp,
    slater_margin,
    soft_bellman,
    solve_lp,
    theorem1_params,
)

__version__ = "0.1.0"


def gap_and_violation(cmdp, policy, optimal_value):
    """Optimality gap against a known optimum and l1 constraint violation."""
    values = evaluate(cmdp, policy)["values"]
    shortfall = cmdp.thresholds - values[1:]
    return optimal_value - values[0], float(shortfall.clip(min=0.0).sum())
