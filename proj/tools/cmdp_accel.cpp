// cmdp-accel: command line front end.
// Exit codes: 0 ok, 1 solver failure, 2 invalid input.

#include "cmdp_accel/arcpo.hpp"
#include "cmdp_accel/baseline_pdo.hpp"
#include "cmdp_accel/errors.hpp"
#include "cmdp_accel/experiments.hpp"
#include "cmdp_accel/generator.hpp"
#include "cmdp_accel/instance_io.hpp"
#include "cmdp_accel/oracle.hpp"
#include "cmdp_accel/svg_plot.hpp"
#include "cmdp_accel/trace_io.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

using namespace cmdp_accel;

namespace {

struct InstanceArgs {
  std::string path;
  int states = 10;
  int actions = 5;
  int constraints = 2;
  double discount = 0.9;
  double fraction = 0.6;
  std::string save;

  void add(CLI::App* app) {
    app->add_option("--instance", path, "instance JSON (otherwise one is generated)");
    app->add_option("--states", states, "generated |S|")->check(CLI::PositiveNumber);
    app->add_option("--actions", actions, "generated |A|")->check(CLI::PositiveNumber);
    app->add_option("--constraints", constraints, "generated m")->check(CLI::NonNegativeNumber);
    app->add_option("--discount", discount, "generated gamma");
    app->add_option("--threshold-fraction", fraction, "c_i as a fraction of max V_i");
    app->add_option("--save-instance", save, "write the instance JSON here");
  }

  TabularCmdp get(std::uint64_t seed) const {
    TabularCmdp cmdp = path.empty()
                           ? gen_random_cmdp(seed, states, actions, constraints, discount, fraction)
                           : load_cmdp(path);
    if (!save.empty()) save_cmdp(cmdp, save);
    return cmdp;
  }
};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << text;
}

std::string csv_text(const std::vector<TraceRow>& rows) {
  std::ostringstream s;
  write_trace_csv(s, rows);
  return s.str();
}

nlohmann::json reach_json(const std::optional<Reach>& r) {
  if (!r) return nullptr;
  return {{"outer_iter", r->outer_iter}, {"oracle_calls", r->oracle_calls}};
}

nlohmann::json config_json(const ArCpoConfig& c) {
  return {{"T", c.T},          {"eta", c.eta},     {"alpha", c.alpha},
          {"q", c.q},          {"tau", c.tau},     {"mu", c.mu},
          {"delta", c.delta},  {"B", c.B},         {"inner", std::string(to_string(c.inner))}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Accelerated primal-dual solvers for tabular constrained MDPs"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "seed for every random choice");
  // accepted before or after the subcommand name
  app.fallthrough();

  // solve
  auto* solve = app.add_subcommand("solve", "solve one instance with one solver");
  InstanceArgs solve_inst;
  solve_inst.add(solve);
  std::string solver = "lp", inner = "softq", trace_path, out_path;
  double epsilon = 0.05, pdo_eta = 0.1, pdo_tau = 1e-3, pdo_delta = 1e-3;
  int pdo_T = 1000, stride = 1;
  solve->add_option("--solver", solver, "lp | arcpo | pdo")
      ->check(CLI::IsMember({"lp", "arcpo", "pdo"}));
  solve->add_option("--inner", inner, "softq | npg")->check(CLI::IsMember({"softq", "npg"}));
  solve->add_option("--epsilon", epsilon, "target accuracy for arcpo");
  solve->add_option("--eta", pdo_eta, "pdo dual stepsize");
  solve->add_option("--tau", pdo_tau, "pdo entropy weight");
  solve->add_option("--delta", pdo_delta, "pdo inner accuracy");
  solve->add_option("--iterations", pdo_T, "pdo outer iterations");
  solve->add_option("--trace", trace_path, "trace CSV path");
  solve->add_option("--stride", stride, "keep every stride-th trace row")->check(CLI::PositiveNumber);
  solve->add_option("--out", out_path, "result JSON path (default stdout)");

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "AR-CPO against a PDO stepsize grid");
  InstanceArgs bench_inst;
  bench_inst.add(bench);
  BenchmarkOptions bopt;
  bopt.jobs = default_jobs();
  std::string bench_out, bench_summary;
  bench->add_option("--epsilon", bopt.epsilon, "target accuracy");
  bench->add_option("--grid-points", bopt.grid_points, "PDO stepsizes")->check(CLI::PositiveNumber);
  bench->add_option("--eta-min", bopt.eta_min, "smallest PDO stepsize");
  bench->add_option("--eta-max", bopt.eta_max, "largest PDO stepsize");
  bench->add_option("--pdo-tau", bopt.pdo_tau, "PDO entropy weight");
  bench->add_flag("--cap-at-reach", bopt.cap_at_arcpo_reach,
                  "stop PDO runs at the AR-CPO calls-to-reach");
  bench->add_option("--jobs", bopt.jobs, "concurrent PDO runs (default CMDP_ACCEL_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--stride", bopt.stride, "keep every stride-th trace row")
      ->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_out, "CSV path (default stdout)");
  bench->add_option("--summary", bench_summary, "summary JSON path");

  // check-smoothness
  auto* smooth = app.add_subcommand("check-smoothness", "tau sweep of the dual smoothness estimate");
  InstanceArgs smooth_inst;
  smooth_inst.add(smooth);
  std::vector<double> taus{0.05, 0.1, 0.2};
  double smooth_mu = 0.0;
  int pairs = 20;
  smooth->add_option("--taus", taus, "entropy weights (space or comma separated)")->delimiter(',');
  smooth->add_option("--mu", smooth_mu, "dual regularization");
  smooth->add_option("--pairs", pairs, "sampled pairs per tau")->check(CLI::PositiveNumber);

  // verify
  auto* verify = app.add_subcommand("verify", "invariant suite on seeded instances");
  VerifyOptions vopt;
  verify->add_option("--instances", vopt.instances, "instance count")->check(CLI::PositiveNumber);
  verify->add_option("--states", vopt.num_states)->check(CLI::PositiveNumber);
  verify->add_option("--actions", vopt.num_actions)->check(CLI::PositiveNumber);
  verify->add_option("--constraints", vopt.num_constraints)->check(CLI::NonNegativeNumber);
  verify->add_option("--discount", vopt.discount);

  // plot
  auto* plot = app.add_subcommand("plot", "SVG of gap and violation from trace CSVs");
  std::vector<std::string> plot_inputs;
  std::string plot_out;
  plot->add_option("inputs", plot_inputs, "trace CSV files")->required()->check(CLI::ExistingFile);
  plot->add_option("-o,--output", plot_out, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*solve) {
      const TabularCmdp cmdp = solve_inst.get(seed);
      const CmdpLpResult lp = solve_cmdp_lp(cmdp);
      if (solver == "lp") {
        emit(out_path, certificate_to_json(lp).dump(2) + "\n");
        return lp.feasible() ? 0 : 1;
      }
      const SolveCertificate& cert = lp.value();
      nlohmann::json result;
      RunTrace trace;
      if (solver == "arcpo") {
        PlanOptions po;
        po.seed = seed;
        po.inner = inner_solver_from_string(inner);
        const TargetPlan plan = plan_arcpo(cmdp, cert, epsilon, po);
        ArCpoResult r = run_arcpo(cmdp, plan.schedule.config);
        trace = std::move(r.trace);
        trace.solver = "arcpo";
        result["config"] = config_json(plan.schedule.config);
        result["schedule_epsilon"] = plan.schedule_epsilon;
        result["L_d"] = plan.schedule.L_d;
        result["policy"] = matrix_to_json(r.policy.probs());
      } else {
        PdoConfig c;
        c.T = pdo_T;
        c.eta = pdo_eta;
        c.tau = pdo_tau;
        c.delta = pdo_delta;
        c.inner = inner_solver_from_string(inner);
        c.B = reward_stats(cmdp).r0_max / ((1.0 - cmdp.discount()) * cert.slater_margin);
        PdoResult r = run_pdo(cmdp, c);
        trace = std::move(r.trace);
        result["config"] = {{"T", c.T}, {"eta", c.eta}, {"tau", c.tau}, {"delta", c.delta}};
        result["policy"] = matrix_to_json(r.mixed_policy.probs());
      }
      score_trace(trace, cmdp, cert.optimal_value);
      result["solver"] = solver;
      result["optimal_value"] = cert.optimal_value;
      result["gap"] = *trace.final_gap;
      result["violation_l1"] = *trace.final_violation;
      result["oracle_calls"] = trace.records.back().oracle_calls;
      result["reach"] =
          reach_json(first_reach(trace, cmdp.thresholds(), cert.optimal_value, epsilon));
      if (!trace_path.empty()) {
        write_trace_csv(trace_path,
                        trace_rows(trace, solver, cmdp.thresholds(), cert.optimal_value, true, stride));
      }
      emit(out_path, result.dump(2) + "\n");
    } else if (*bench) {
      bopt.plan.seed = seed;
      const TabularCmdp cmdp = bench_inst.get(seed);
      const BenchmarkResult r = run_benchmark(cmdp, bopt);
      emit(bench_out, csv_text(r.rows));
      if (!bench_summary.empty()) {
        nlohmann::json s;
        s["optimal_value"] = r.optimal_value;
        s["arcpo"] = {{"config", config_json(r.plan.schedule.config)},
                      {"reach", reach_json(r.arcpo_reach)},
                      {"final_gap", *r.arcpo_trace.final_gap},
                      {"final_violation", *r.arcpo_trace.final_violation}};
        for (const PdoGridEntry& e : r.pdo) {
          s["pdo"].push_back({{"eta", e.eta},
                              {"reach_mixed", reach_json(e.reach_mixed)},
                              {"reach_last", reach_json(e.reach_last)},
                              {"final_gap", *e.trace.final_gap},
                              {"final_violation", *e.trace.final_violation}});
        }
        s["arcpo_wins"] = r.arcpo_wins();
        emit(bench_summary, s.dump(2) + "\n");
      }
    } else if (*smooth) {
      const TabularCmdp cmdp = smooth_inst.get(seed);
      const double xi = slater_margin(cmdp);
      if (!(xi > 0.0)) throw InvalidInput("instance has no strictly feasible policy");
      const double B = reward_stats(cmdp).r0_max / ((1.0 - cmdp.discount()) *
                                                   (std::isfinite(xi) ? xi : 1.0));
      std::cout << "tau,estimate\n";
      for (const SmoothnessPoint& p : smoothness_sweep(cmdp, taus, smooth_mu, B, pairs, seed)) {
        std::printf("%.10g,%.10g\n", p.tau, p.estimate);
      }
    } else if (*verify) {
      vopt.seed = seed;
      bool ok = true;
      for (const CheckResult& c : run_verify(vopt)) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
        ok = ok && c.passed;
      }
      return ok ? 0 : 1;
    } else if (*plot) {
      std::vector<TraceRow> rows;
      for (const std::string& path : plot_inputs) {
        auto part = read_trace_csv(path);
        rows.insert(rows.end(), part.begin(), part.end());
      }
      emit(plot_out, render_svg(rows));
    }
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
