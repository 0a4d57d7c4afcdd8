#include "cmdp_accel/arco.hpp"

#include "cmdp_accel/errors.hpp"
#include "cmdp_accel/instance_io.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>

namespace cmdp_accel {

void ConstrainedProblem::validate() const {
  if (dimension <= 0) throw InvalidInput("problem dimension must be positive");
  if (num_constraints < 0) throw InvalidInput("num_constraints must be >= 0");
  if (!objective || !constraints || !lagrangian_minimizer) {
    throw InvalidInput("problem needs objective, constraints and a Lagrangian minimizer");
  }
  if (!(G > 0.0)) throw InvalidInput("G must be > 0");
  if (slater_point.size() != dimension) throw InvalidInput("Slater point has the wrong dimension");
  if (num_constraints > 0 && !(slater_margin > 0.0)) {
    throw InvalidInput("Slater margin must be > 0");
  }
  const Vector f = constraints(slater_point);
  if (f.size() != num_constraints) throw InvalidInput("constraint evaluator has the wrong arity");
  for (int i = 0; i < num_constraints; ++i) {
    if (f[i] > -slater_margin + 1e-10) {
      throw InvalidInput("Slater point violates f_" + std::to_string(i + 1) +
                         " <= -xi");
    }
  }
}

double ArcoConfig::alpha_at(int t) const {
  if (schedule.kind == StepSchedule::Kind::Constant) return alpha;
  return t < schedule.H ? 2.0 * schedule.s / (t + 1) : 2.0 * schedule.s / schedule.H;
}

double ArcoConfig::q_at(int t) const {
  return schedule.kind == StepSchedule::Kind::Constant ? q : alpha_at(t);
}

StepSizes arco_params(double mu, double L) {
  if (!(L >= 0.0)) throw InvalidInput("dual smoothness L must be >= 0");
  return theorem1_params(mu, L + mu);
}

size_t sample_index(const Vector& weights, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng) * weights.sum();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<size_t>(i);
  }
  return static_cast<size_t>(weights.size() - 1);
}

ArcoResult run_arco(const ConstrainedProblem& problem, const ArcoConfig& config) {
  problem.validate();
  if (config.T < 1) throw InvalidInput("T must be >= 1");
  if (!(config.eta > 0.0)) throw InvalidInput("eta must be > 0");
  if (!(config.mu >= 0.0)) throw InvalidInput("mu must be >= 0");
  if (!(config.delta > 0.0)) throw InvalidInput("delta must be > 0");
  const int m = problem.num_constraints;
  const double B = config.B ? *config.B
                            : (m > 0 ? problem.G / problem.slater_margin : problem.G);
  if (!(B > 0.0)) throw InvalidInput("B must be > 0");

  DualIterates it{Vector::Zero(m), Vector::Zero(m), Vector::Zero(m)};
  ArcoResult out;
  out.trace.reserve(static_cast<size_t>(config.T));
  double expected_f0 = 0.0;
  Vector expected_f = Vector::Zero(m);

  auto dual_value = [&](const Vector& lambda) {
    const Vector x = problem.lagrangian_minimizer(config.delta, lambda);
    return problem.objective(x) + lambda.dot(problem.constraints(x)) -
           0.5 * config.mu * lambda.squaredNorm();
  };

  if (config.reference_lambda) {
    const Vector& ref = *config.reference_lambda;
    if (ref.size() != m) throw InvalidInput("reference_lambda must have one entry per constraint");
    // lambda_0 = bar lambda_0 = 0
    out.K0 = dual_value(ref) - dual_value(Vector::Zero(m)) +
             0.5 * config.alpha_at(1) * (config.mu + 1.0 / config.eta) * ref.squaredNorm();
  }

  for (int t = 1; t <= config.T; ++t) {
    const double alpha = config.alpha_at(t);
    const double q = config.q_at(t);
    if (!(alpha > 0.0 && alpha <= 1.0) || !(q >= 0.0 && q <= 1.0)) {
      throw InvalidInput("alpha and q must lie in (0, 1]");
    }
    it.lambda_under = (1.0 - q) * it.lambda_bar + q * it.lambda;

    Vector x;
    try {
      x = problem.lagrangian_minimizer(config.delta, it.lambda_under);
    } catch (const std::exception& e) {
      throw SolverError("Lagrangian minimizer failed at outer iteration " + std::to_string(t) +
                        ": " + e.what());
    }
    if (x.size() != problem.dimension || !x.allFinite()) {
      throw SolverError("Lagrangian minimizer returned an invalid point at outer iteration " +
                        std::to_string(t));
    }
    const double f0 = problem.objective(x);
    const Vector f = problem.constraints(x);
    // ascent direction on d_mu, hence the flipped sign inside the prox step
    const Vector g_hat = f - config.mu * it.lambda_under;
    const Vector next = dual_prox_step(it.lambda, it.lambda_under, -g_hat, config.eta,
                                       config.mu, B);

    ArcoRecord rec;
    rec.t = t;
    rec.objective = f0;
    rec.constraints = f;
    rec.lambda_under = it.lambda_under;
    rec.lambda_step_norm = (next - it.lambda).norm();
    rec.lambda = next;

    it.lambda = next;
    it.lambda_bar = (1.0 - alpha) * it.lambda_bar + alpha * it.lambda;
    if (t == 1) {
      expected_f0 = f0;
      expected_f = f;
    } else {
      expected_f0 = (1.0 - alpha) * expected_f0 + alpha * f0;
      expected_f = (1.0 - alpha) * expected_f + alpha * f;
    }
    rec.expected_objective = expected_f0;
    rec.expected_constraints = expected_f;
    if (config.track_dual) rec.dual_value = dual_value(it.lambda_bar);
    out.trace.push_back(std::move(rec));
    out.iterates.push_back(std::move(x));
  }

  out.weights.resize(config.T);
  double tail = 1.0;
  for (int t = config.T; t >= 1; --t) {
    out.weights[t - 1] = t == 1 ? tail : config.alpha_at(t) * tail;
    tail *= 1.0 - config.alpha_at(t);
  }
  std::mt19937_64 rng(config.seed);
  out.sampled_index = sample_index(out.weights, rng);
  out.sampled = out.iterates[out.sampled_index];
  out.expected_objective = expected_f0;
  out.expected_constraints = expected_f;
  out.final_iterates = std::move(it);
  return out;
}

ConstrainedProblem make_quadratic_problem(const QuadraticProblemData& data) {
  const Eigen::Index n = data.Q.rows();
  if (data.Q.cols() != n || data.c.size() != n) throw InvalidInput("Q must be n x n and c length n");
  if (data.A.cols() != n || data.b.size() != data.A.rows()) {
    throw InvalidInput("A must be m x n and b length m");
  }
  auto llt = std::make_shared<const Eigen::LLT<Matrix>>(data.Q);
  if (llt->info() != Eigen::Success) throw InvalidInput("Q must be symmetric positive definite");

  ConstrainedProblem p;
  p.dimension = static_cast<int>(n);
  p.num_constraints = static_cast<int>(data.A.rows());
  p.objective = [Q = data.Q, c = data.c](const Vector& x) { return 0.5 * x.dot(Q * x) + c.dot(x); };
  p.constraints = [A = data.A, b = data.b](const Vector& x) -> Vector { return A * x - b; };
  p.lagrangian_minimizer = [llt, A = data.A, c = data.c](double, const Vector& lambda) -> Vector {
    return -llt->solve(c + A.transpose() * lambda);
  };
  p.G = data.G;
  p.slater_point = data.slater_point;
  const Vector f = data.A * data.slater_point - data.b;
  p.slater_margin = f.size() > 0 ? -f.maxCoeff() : 1.0;
  return p;
}

double quadratic_dual_smoothness(const QuadraticProblemData& data) {
  if (data.A.rows() == 0) return 0.0;
  const Matrix H = data.A * data.Q.llt().solve(data.A.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (H + H.transpose()));
  return eig.eigenvalues().maxCoeff();
}

QuadraticProblemData quadratic_from_json(const nlohmann::json& doc) {
  auto get = [&](const char* key) -> const nlohmann::json& {
    if (!doc.contains(key)) throw InvalidInput(std::string("quadratic problem missing '") + key + "'");
    return doc.at(key);
  };
  QuadraticProblemData d;
  d.Q = matrix_from_json(get("Q"), "Q");
  d.c = vector_from_json(get("c"), "c");
  d.A = matrix_from_json(get("A"), "A");
  if (d.A.rows() == 0) d.A.resize(0, d.Q.cols());
  d.b = vector_from_json(get("b"), "b");
  d.slater_point = vector_from_json(get("slater_point"), "slater_point");
  if (!get("G").is_number()) throw InvalidInput("G must be a number");
  d.G = get("G").get<double>();
  return d;
}

QuadraticProblemData load_quadratic(const std::string& path) {
  return quadratic_from_json(read_json_file(path));
}

}  // namespace cmdp_accel
