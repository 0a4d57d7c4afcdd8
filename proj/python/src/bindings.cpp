#include "cmdp_accel/arcpo.hpp"
#include "cmdp_accel/baseline_pdo.hpp"
#include "cmdp_accel/errors.hpp"
#include "cmdp_accel/experiments.hpp"
#include "cmdp_accel/generator.hpp"
#include "cmdp_accel/instance_io.hpp"
#include "cmdp_accel/oracle.hpp"
#include "cmdp_accel/regpo.hpp"
#include "cmdp_accel/trace_io.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

namespace py = pybind11;
using namespace cmdp_accel;

namespace {

// Records as columns; vector-valued fields become (T, m) arrays.
py::dict trace_to_dict(const RunTrace& trace, int m) {
  const auto n = static_cast<Eigen::Index>(trace.records.size());
  Eigen::VectorXi t(n);
  Eigen::Matrix<long long, Eigen::Dynamic, 1> calls(n);
  Vector v0(n), mixed_v0(n), step(n), grad_err(n), lag_gap(n);
  Matrix cons(n, m), mixed_cons(n, m), lam(n, m);
  for (Eigen::Index k = 0; k < n; ++k) {
    const IterationRecord& r = trace.records[k];
    t[k] = r.t;
    calls[k] = r.oracle_calls;
    v0[k] = r.V0;
    mixed_v0[k] = r.mixed_V0;
    step[k] = r.lambda_step_norm;
    grad_err[k] = r.grad_error_norm;
    lag_gap[k] = r.lagrangian_gap;
    if (m > 0) {
      cons.row(k) = r.constraint_values.transpose();
      mixed_cons.row(k) = r.mixed_constraint_values.transpose();
      lam.row(k) = r.lambda.transpose();
    }
  }
  py::dict d;
  d["t"] = t;
  d["oracle_calls"] = calls;
  d["V0"] = v0;
  d["constraint_values"] = cons;
  d["lambda"] = lam;
  d["lambda_step_norm"] = step;
  d["mixed_V0"] = mixed_v0;
  d["mixed_constraint_values"] = mixed_cons;
  d["grad_error_norm"] = grad_err;
  d["lagrangian_gap"] = lag_gap;
  return d;
}

py::dict certificate_dict(const SolveCertificate& c) {
  py::dict d;
  d["optimal_value"] = c.optimal_value;
  d["occupancy"] = c.optimal_occupancy.nu;
  d["policy"] = c.optimal_policy;
  d["constraint_values"] = c.constraint_values;
  d["feasibility_residual"] = c.feasibility_residual;
  d["slater_margin"] = c.slater_margin;
  d["dual_objective"] = c.dual_objective;
  return d;
}

InnerSolver inner_from(const std::string& name) { return inner_solver_from_string(name); }

}  // namespace

PYBIND11_MODULE(_cmdp_accel, mod) {
  mod.doc() = "Accelerated primal-dual solvers for tabular constrained MDPs";

  py::register_exception<InvalidInput>(mod, "InvalidInput", PyExc_ValueError);
  py::register_exception<SolverError>(mod, "SolverError", PyExc_RuntimeError);

  py::class_<TabularCmdp>(mod, "TabularCmdp")
      .def(py::init<int, int, Matrix, std::vector<Matrix>, Vector, double, Vector>(),
           py::arg("num_states"), py::arg("num_actions"), py::arg("transition"),
           py::arg("rewards"), py::arg("thresholds"), py::arg("discount"),
           py::arg("initial_dist"))
      .def_property_readonly("num_states", &TabularCmdp::num_states)
      .def_property_readonly("num_actions", &TabularCmdp::num_actions)
      .def_property_readonly("num_constraints", &TabularCmdp::num_constraints)
      .def_property_readonly("discount", &TabularCmdp::discount)
      .def_property_readonly("transition",
                             py::overload_cast<>(&TabularCmdp::transition, py::const_))
      .def_property_readonly("rewards", &TabularCmdp::rewards)
      .def_property_readonly("thresholds", &TabularCmdp::thresholds)
      .def_property_readonly("initial_dist", &TabularCmdp::initial_dist)
      .def("to_json", [](const TabularCmdp& c) { return cmdp_to_json(c).dump(); })
      .def_static("from_json",
                  [](const std::string& text) {
                    nlohmann::json doc;
                    try {
                      doc = nlohmann::json::parse(text);
                    } catch (const nlohmann::json::exception& e) {
                      throw InvalidInput(std::string("instance is not valid JSON: ") + e.what());
                    }
                    return cmdp_from_json(doc);
                  })
      .def("__repr__", [](const TabularCmdp& c) {
        std::ostringstream out;
        out << "TabularCmdp(states=" << c.num_states() << ", actions=" << c.num_actions()
            << ", constraints=" << c.num_constraints() << ", discount=" << c.discount() << ")";
        return out.str();
      });

  py::class_<Policy>(mod, "Policy")
      .def(py::init<Matrix>(), py::arg("probs"))
      .def_static("uniform", &Policy::uniform, py::arg("num_states"), py::arg("num_actions"))
      .def_static("deterministic", &Policy::deterministic, py::arg("actions"),
                  py::arg("num_actions"))
      .def_property_readonly("probs", &Policy::probs);

  mod.def("gen_random_cmdp",
          py::overload_cast<std::uint64_t, int, int, int, double, double>(&gen_random_cmdp),
          py::arg("seed"), py::arg("num_states"), py::arg("num_actions"),
          py::arg("num_constraints"), py::arg("discount") = 0.9,
          py::arg("threshold_fraction") = 0.6);
  mod.def("load_cmdp", [](const std::string& path) { return load_cmdp(path); }, py::arg("path"));
  mod.def("save_cmdp", &save_cmdp, py::arg("cmdp"), py::arg("path"));

  mod.def(
      "evaluate",
      [](const TabularCmdp& c, const Policy& pi) {
        const PolicyEvaluation ev = evaluate(c, pi);
        py::dict d;
        d["values"] = ev.values;
        d["entropy"] = ev.entropy;
        d["occupancy"] = ev.occupancy.nu;
        return d;
      },
      py::arg("cmdp"), py::arg("policy"),
      "Values V_0..V_m, discounted entropy and occupancy measure of a policy.");
  mod.def("occupancy", [](const TabularCmdp& c, const Policy& pi) { return occupancy(c, pi).nu; },
          py::arg("cmdp"), py::arg("policy"));
  mod.def("combined_reward", &combined_reward, py::arg("cmdp"), py::arg("lam"));

  mod.def("soft_bellman", &soft_bellman, py::arg("cmdp"), py::arg("lam"), py::arg("tau"),
          py::arg("q"));
  mod.def(
      "regpo",
      [](const TabularCmdp& c, const Vector& lam, double tau, double delta, double B,
         const std::string& inner, bool adaptive) {
        RegpoOptions opt;
        opt.stop = adaptive ? StopMode::Adaptive : StopMode::Budget;
        const RegpoResult r =
            run_regpo(inner_from(inner), c, lam, tau, delta, reward_stats(c), B, opt);
        py::dict d;
        d["policy"] = r.policy;
        d["q_values"] = r.q_values;
        d["iterations"] = r.iterations_used;
        d["oracle_calls"] = r.oracle_calls;
        d["residual"] = r.sup_norm_residual;
        return d;
      },
      py::arg("cmdp"), py::arg("lam"), py::arg("tau"), py::arg("delta"), py::arg("B") = 1.0,
      py::arg("inner") = "softq", py::arg("adaptive") = false,
      "Entropy-regularized inner solve (softq or npg) at a fixed multiplier.");

  mod.def(
      "solve_lp",
      [](const TabularCmdp& c) -> py::object {
        const CmdpLpResult r = solve_cmdp_lp(c);
        if (!r.feasible()) return py::none();
        return certificate_dict(*r.certificate);
      },
      py::arg("cmdp"), "Exact optimum by the occupancy LP; None when infeasible.");
  mod.def("slater_margin", [](const TabularCmdp& c) { return slater_margin(c); }, py::arg("cmdp"));

  py::class_<ArCpoConfig>(mod, "ArCpoConfig")
      .def(py::init<>())
      .def_readwrite("T", &ArCpoConfig::T)
      .def_readwrite("eta", &ArCpoConfig::eta)
      .def_readwrite("alpha", &ArCpoConfig::alpha)
      .def_readwrite("q", &ArCpoConfig::q)
      .def_readwrite("tau", &ArCpoConfig::tau)
      .def_readwrite("mu", &ArCpoConfig::mu)
      .def_readwrite("delta", &ArCpoConfig::delta)
      .def_readwrite("B", &ArCpoConfig::B)
      .def_readwrite("warm_start", &ArCpoConfig::warm_start)
      .def_readwrite("diagnostics", &ArCpoConfig::diagnostics)
      .def_property(
          "inner", [](const ArCpoConfig& c) { return std::string(to_string(c.inner)); },
          [](ArCpoConfig& c, const std::string& s) { c.inner = inner_from(s); })
      .def("validate", &ArCpoConfig::validate);

  py::class_<StepSizes>(mod, "StepSizes")
      .def_readonly("alpha", &StepSizes::alpha)
      .def_readonly("q", &StepSizes::q)
      .def_readonly("eta", &StepSizes::eta);
  mod.def("theorem1_params", &theorem1_params, py::arg("mu"), py::arg("L_d"));

  mod.def(
      "plan_arcpo",
      [](const TabularCmdp& c, double epsilon, std::uint64_t seed, int pairs) {
        const SolveCertificate cert = solve_cmdp_lp(c).value();
        PlanOptions po;
        po.seed = seed;
        po.smoothness_pairs = pairs;
        const TargetPlan plan = plan_arcpo(c, cert, epsilon, po);
        py::dict d;
        d["config"] = plan.schedule.config;
        d["L_d"] = plan.schedule.L_d;
        d["smoothness_estimate"] = plan.smoothness_estimate;
        d["schedule_epsilon"] = plan.schedule_epsilon;
        d["K0_bound"] = plan.schedule.K0_bound;
        d["optimal_value"] = cert.optimal_value;
        return d;
      },
      py::arg("cmdp"), py::arg("epsilon"), py::arg("seed") = 0, py::arg("smoothness_pairs") = 20,
      "Corollary schedule aimed at gap and violation <= epsilon.");

  mod.def(
      "run_arcpo",
      [](const TabularCmdp& c, const ArCpoConfig& cfg) {
        std::optional<ArCpoResult> held;
        {
          py::gil_scoped_release release;
          held = run_arcpo(c, cfg);
        }
        const ArCpoResult& r = *held;
        py::dict d;
        d["policy"] = r.policy;
        d["occupancy"] = r.mixed_occupancy.nu;
        d["weights"] = r.weights;
        d["lambda"] = r.final_iterates.lambda;
        d["trace"] = trace_to_dict(r.trace, c.num_constraints());
        return d;
      },
      py::arg("cmdp"), py::arg("config"));

  py::class_<PdoConfig>(mod, "PdoConfig")
      .def(py::init<>())
      .def_readwrite("T", &PdoConfig::T)
      .def_readwrite("eta", &PdoConfig::eta)
      .def_readwrite("tau", &PdoConfig::tau)
      .def_readwrite("delta", &PdoConfig::delta)
      .def_readwrite("B", &PdoConfig::B)
      .def_readwrite("project_to_box", &PdoConfig::project_to_box)
      .def_readwrite("max_oracle_calls", &PdoConfig::max_oracle_calls);

  mod.def(
      "run_pdo",
      [](const TabularCmdp& c, const PdoConfig& cfg) {
        std::optional<PdoResult> held;
        {
          py::gil_scoped_release release;
          held = run_pdo(c, cfg);
        }
        const PdoResult& r = *held;
        py::dict d;
        d["mixed_policy"] = r.mixed_policy;
        d["last_policy"] = r.last_policy;
        d["trace"] = trace_to_dict(r.trace, c.num_constraints());
        return d;
      },
      py::arg("cmdp"), py::arg("config"));

  mod.def("dual_prox_step", &dual_prox_step, py::arg("lambda_prev"), py::arg("lambda_under"),
          py::arg("g_hat"), py::arg("eta"), py::arg("mu"), py::arg("B"));
  mod.def(
      "estimate_dual_smoothness",
      [](const TabularCmdp& c, double tau, double mu, int pairs, double B, std::uint64_t seed) {
        return estimate_dual_smoothness(c, tau, mu, pairs, B, seed, InnerSolver::SoftQ);
      },
      py::arg("cmdp"), py::arg("tau"), py::arg("mu"), py::arg("num_pairs"), py::arg("box_B"),
      py::arg("seed") = 0);

  mod.def(
      "benchmark_csv",
      [](const TabularCmdp& c, double epsilon, int grid_points, std::uint64_t seed, int jobs,
         int stride) {
        BenchmarkOptions opt;
        opt.epsilon = epsilon;
        opt.grid_points = grid_points;
        opt.plan.seed = seed;
        opt.jobs = jobs;
        opt.stride = stride;
        std::ostringstream out;
        {
          py::gil_scoped_release release;
          write_trace_csv(out, run_benchmark(c, opt).rows);
        }
        return out.str();
      },
      py::arg("cmdp"), py::arg("epsilon"), py::arg("grid_points") = 8, py::arg("seed") = 0,
      py::arg("jobs") = 1, py::arg("stride") = 1,
      "AR-CPO against the PDO stepsize grid, as the benchmark CSV text.");
}
