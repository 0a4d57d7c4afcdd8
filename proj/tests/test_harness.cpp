#include "cmdp_accel/errors.hpp"
#include "cmdp_accel/experiments.hpp"
#include "cmdp_accel/generator.hpp"
#include "cmdp_accel/instance_io.hpp"
#include "cmdp_accel/oracle.hpp"
#include "cmdp_accel/svg_plot.hpp"
#include "cmdp_accel/trace_io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <sstream>

using namespace cmdp_accel;

TEST_CASE("generator is deterministic and strictly feasible") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TabularCmdp a = gen_random_cmdp(seed, 6, 3, 2, 0.9, 0.5);
    const TabularCmdp b = gen_random_cmdp(seed, 6, 3, 2, 0.9, 0.5);
    CHECK(cmdp_to_json(a).dump() == cmdp_to_json(b).dump());
    CHECK(slater_margin(a) >= 0.0);
  }
  CHECK(cmdp_to_json(gen_random_cmdp(1, 4, 2, 1, 0.9, 0.5)).dump() !=
        cmdp_to_json(gen_random_cmdp(2, 4, 2, 1, 0.9, 0.5)).dump());
  CHECK_THROWS_AS(gen_random_cmdp(0, 4, 2, 1, 0.9, 1.0), InvalidInput);
  CHECK_THROWS_AS(gen_random_cmdp(0, 0, 2, 1, 0.9, 0.5), InvalidInput);
}

TEST_CASE("Slater margin shrinks to 0+ as the threshold fraction approaches 1") {
  double prev = 1e300;
  for (double f : {0.5, 0.7, 0.9, 0.99, 0.999}) {
    const double xi = slater_margin(gen_random_cmdp(3, 5, 3, 1, 0.9, f));
    CHECK(xi > 0.0);
    CHECK(xi < prev);
    prev = xi;
  }
  CHECK(prev < 0.05);
}

TEST_CASE("trace CSV round trip, stride and schema errors") {
  RunTrace t;
  for (int k = 1; k <= 7; ++k) {
    IterationRecord r;
    r.t = k;
    r.V0 = r.mixed_V0 = 1.0 / k;
    r.constraint_values = r.mixed_constraint_values = Vector::Constant(2, 0.1 * k);
    r.lambda = Vector::Constant(2, k);
    r.lambda_step_norm = 0.5;
    r.oracle_calls = 10 * k;
    t.records.push_back(r);
  }
  const Vector c = Vector::Constant(2, 0.5);
  const auto rows = trace_rows(t, "x", c, 1.0, true, 3);
  REQUIRE(rows.size() == 3);  // t = 3, 6 and the last one
  CHECK(rows.back().outer_iter == 7);
  CHECK(rows[0].violation_l1 == doctest::Approx(0.4));
  CHECK(rows[0].gap == doctest::Approx(1.0 - 1.0 / 3.0));

  std::stringstream s;
  write_trace_csv(s, rows);
  CHECK(s.str().rfind(std::string(kTraceHeader) + "\n", 0) == 0);
  const auto back = read_trace_csv(s);
  REQUIRE(back.size() == 3);
  CHECK(back[1].oracle_calls == 60);
  CHECK(back[1].V0 == doctest::Approx(1.0 / 6.0).epsilon(1e-9));

  std::stringstream bad("solver,outer_iter\nx,1\n");
  CHECK_THROWS_AS(read_trace_csv(bad), InvalidInput);
  std::stringstream short_row(std::string(kTraceHeader) + "\nx,1,2\n");
  CHECK_THROWS_AS(read_trace_csv(short_row), InvalidInput);
  std::stringstream nan_row(std::string(kTraceHeader) + "\nx,1,2,a,b,c,d,e\n");
  CHECK_THROWS_AS(read_trace_csv(nan_row), InvalidInput);
  CHECK_THROWS_AS(trace_rows(t, "x", c, 1.0, true, 0), InvalidInput);
}

TEST_CASE("SVG rendering") {
  std::vector<TraceRow> rows{{"a", 1, 10, 1, 0.5, 0.1, 0, 0}, {"a", 2, 20, 1, 0.01, 0, 0, 0},
                             {"b<", 1, 15, 1, 0.3, 0.2, 0, 0}};
  const std::string svg = render_svg(rows);
  CHECK(svg.rfind("<svg", 0) == 0);
  size_t count = 0;
  for (size_t pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++count;
  CHECK(count == 4);
  CHECK(svg.find("b&lt;") != std::string::npos);
  CHECK(render_svg(rows) == svg);
  CHECK_THROWS_AS(render_svg({}), InvalidInput);
}

TEST_CASE("grid, reach and jobs helpers") {
  const auto g = log_grid(1e-3, 1.0, 8);
  REQUIRE(g.size() == 8);
  CHECK(g.front() == doctest::Approx(1e-3));
  CHECK(g.back() == doctest::Approx(1.0));
  CHECK(g[1] / g[0] == doctest::Approx(g[7] / g[6]));
  CHECK_THROWS_AS(log_grid(0.0, 1.0, 3), InvalidInput);

  RunTrace t;
  for (int k = 1; k <= 4; ++k) {
    IterationRecord r;
    r.t = k;
    r.mixed_V0 = 1.0 - 0.1 * (4 - k);
    r.V0 = 1.0;
    r.mixed_constraint_values = Vector::Constant(1, 1.0);
    r.constraint_values = Vector::Constant(1, 0.0);
    r.oracle_calls = 5 * k;
    t.records.push_back(r);
  }
  const auto reach = first_reach(t, Vector::Constant(1, 1.0), 1.0, 0.15);
  REQUIRE(reach.has_value());
  CHECK(reach->outer_iter == 3);
  CHECK(reach->oracle_calls == 15);
  CHECK(!first_reach(t, Vector::Constant(1, 1.0), 1.0, 0.15, false));

  setenv("CMDP_ACCEL_THREADS", "3", 1);
  CHECK(default_jobs() == 3);
  setenv("CMDP_ACCEL_THREADS", "zero", 1);
  CHECK(default_jobs() == 1);
  unsetenv("CMDP_ACCEL_THREADS");
  CHECK(default_jobs() == 1);
}

TEST_CASE("target plan instantiates the schedule at min(eps / 5, eps B / 6)") {
  const TabularCmdp c = gen_random_cmdp(1, 4, 3, 1, 0.9, 0.6);
  const SolveCertificate cert = solve_cmdp_lp(c).value();
  const TargetPlan p = plan_arcpo(c, cert, 0.1);
  const double B = reward_stats(c).r0_max / (0.1 * cert.slater_margin);
  CHECK(p.schedule_epsilon == doctest::Approx(std::min(0.1 / 5, 0.1 * B / 6)));
  CHECK(p.schedule.config.B == doctest::Approx(B));
  CHECK(p.schedule.L_d >= 2.0 * p.smoothness_estimate - 1e-12);
}

TEST_CASE("benchmark output is independent of the job count") {
  const TabularCmdp c = gen_random_cmdp(4, 4, 3, 1, 0.9, 0.7);
  BenchmarkOptions opt;
  opt.epsilon = 0.1;
  opt.grid_points = 4;
  opt.cap_at_arcpo_reach = true;
  opt.jobs = 1;
  std::stringstream one, three;
  write_trace_csv(one, run_benchmark(c, opt).rows);
  opt.jobs = 3;
  const BenchmarkResult r = run_benchmark(c, opt);
  write_trace_csv(three, r.rows);
  CHECK(one.str() == three.str());
  REQUIRE(r.pdo.size() == 4);
  CHECK(r.rows.front().solver == "arcpo");
  CHECK(r.pdo[0].eta < r.pdo[3].eta);
}

TEST_CASE("verify suite passes") {
  for (const CheckResult& c : run_verify(VerifyOptions{})) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.passed);
  }
}
