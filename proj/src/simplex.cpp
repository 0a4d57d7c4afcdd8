#include "cmdp_accel/simplex.hpp"

#include "cmdp_accel/errors.hpp"

#include <limits>

namespace cmdp_accel {

namespace {

class Tableau {
 public:
  Tableau(Matrix body, Vector rhs, std::vector<int> basis, const SimplexOptions& options)
      : body_(std::move(body)), rhs_(std::move(rhs)), basis_(std::move(basis)), opt_(options) {}

  // Maximizes cost^T x over columns flagged in `allowed`. Returns false when
  // the objective is unbounded.
  bool optimize(const Vector& cost, const std::vector<bool>& allowed) {
    const Eigen::Index rows = body_.rows();
    const Eigen::Index cols = body_.cols();
    for (;;) {
      Vector cb(rows);
      for (Eigen::Index i = 0; i < rows; ++i) cb[i] = cost[basis_[static_cast<size_t>(i)]];
      // Bland: the lowest-index improving column enters
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < cols; ++j) {
        if (!allowed[static_cast<size_t>(j)]) continue;
        const double reduced = cost[j] - cb.dot(body_.col(j));
        if (reduced > opt_.pivot_tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;

      // ratio test; ties go to the basic variable with the lowest index
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double a = body_(i, enter);
        if (a <= opt_.pivot_tol) continue;
        const double ratio = rhs_[i] / a;
        if (leave < 0 || ratio < best - 1e-12) {
          best = ratio;
          leave = i;
        } else if (ratio <= best + 1e-12 &&
                   basis_[static_cast<size_t>(i)] < basis_[static_cast<size_t>(leave)]) {
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    if (++pivots_ > opt_.max_pivots) throw SolverError("simplex exceeded its pivot limit");
    const double p = body_(row, col);
    body_.row(row) /= p;
    rhs_[row] /= p;
    for (Eigen::Index i = 0; i < body_.rows(); ++i) {
      if (i == row) continue;
      const double f = body_(i, col);
      if (f == 0.0) continue;
      body_.row(i) -= f * body_.row(row);
      rhs_[i] -= f * rhs_[row];
      body_(i, col) = 0.0;
    }
    basis_[static_cast<size_t>(row)] = static_cast<int>(col);
  }

  const Matrix& body() const { return body_; }
  const Vector& rhs() const { return rhs_; }
  const std::vector<int>& basis() const { return basis_; }
  long long pivots() const { return pivots_; }

 private:
  Matrix body_;
  Vector rhs_;
  std::vector<int> basis_;
  SimplexOptions opt_;
  long long pivots_ = 0;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
  const Eigen::Index rows = lp.A.rows();
  const Eigen::Index n = lp.A.cols();
  if (lp.b.size() != rows || static_cast<Eigen::Index>(lp.sense.size()) != rows ||
      lp.objective.size() != n) {
    throw InvalidInput("linear program has inconsistent dimensions");
  }

  // normalize to b >= 0
  Matrix A = lp.A;
  Vector b = lp.b;
  std::vector<ConstraintSense> sense = lp.sense;
  std::vector<double> flip(static_cast<size_t>(rows), 1.0);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (b[i] < 0.0) {
      A.row(i) *= -1.0;
      b[i] = -b[i];
      flip[static_cast<size_t>(i)] = -1.0;
      if (sense[i] == ConstraintSense::LessEqual) {
        sense[i] = ConstraintSense::GreaterEqual;
      } else if (sense[i] == ConstraintSense::GreaterEqual) {
        sense[i] = ConstraintSense::LessEqual;
      }
    }
  }

  // columns: original | slack or surplus per inequality | artificial per GE/EQ row
  Eigen::Index num_slack = 0;
  Eigen::Index num_art = 0;
  for (auto s : sense) {
    if (s != ConstraintSense::Equal) ++num_slack;
    if (s != ConstraintSense::LessEqual) ++num_art;
  }
  const Eigen::Index cols = n + num_slack + num_art;
  Matrix body = Matrix::Zero(rows, cols);
  body.leftCols(n) = A;
  std::vector<int> basis(static_cast<size_t>(rows));
  Eigen::Index next_slack = n;
  Eigen::Index next_art = n + num_slack;
  for (Eigen::Index i = 0; i < rows; ++i) {
    switch (sense[i]) {
      case ConstraintSense::LessEqual:
        body(i, next_slack) = 1.0;
        basis[static_cast<size_t>(i)] = static_cast<int>(next_slack++);
        break;
      case ConstraintSense::GreaterEqual:
        body(i, next_slack++) = -1.0;
        body(i, next_art) = 1.0;
        basis[static_cast<size_t>(i)] = static_cast<int>(next_art++);
        break;
      case ConstraintSense::Equal:
        body(i, next_art) = 1.0;
        basis[static_cast<size_t>(i)] = static_cast<int>(next_art++);
        break;
    }
  }
  const Matrix augmented = body;

  Tableau tab(std::move(body), b, std::move(basis), options);
  LpSolution out;

  // phase 1: maximize -sum(artificials)
  std::vector<bool> allowed(static_cast<size_t>(cols), true);
  if (num_art > 0) {
    Vector phase1 = Vector::Zero(cols);
    phase1.tail(num_art).setConstant(-1.0);
    tab.optimize(phase1, allowed);
    double infeasibility = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (tab.basis()[static_cast<size_t>(i)] >= n + num_slack) infeasibility += tab.rhs()[i];
    }
    if (infeasibility > options.feasibility_tol * (1.0 + b.lpNorm<Eigen::Infinity>())) {
      out.status = LpStatus::Infeasible;
      out.pivots = tab.pivots();
      return out;
    }
    // drive zero-level artificials out of the basis where a real column allows it
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (tab.basis()[static_cast<size_t>(i)] < n + num_slack) continue;
      for (Eigen::Index j = 0; j < n + num_slack; ++j) {
        if (std::abs(tab.body()(i, j)) > options.pivot_tol) {
          tab.pivot(i, j);
          break;
        }
      }
    }
    for (Eigen::Index j = n + num_slack; j < cols; ++j) allowed[static_cast<size_t>(j)] = false;
  }

  // phase 2
  Vector cost = Vector::Zero(cols);
  cost.head(n) = lp.objective;
  if (!tab.optimize(cost, allowed)) {
    out.status = LpStatus::Unbounded;
    out.pivots = tab.pivots();
    return out;
  }

  // re-solve the basic system from the original data
  Matrix basis_matrix(rows, rows);
  Vector cb(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const int col = tab.basis()[static_cast<size_t>(i)];
    basis_matrix.col(i) = augmented.col(col);
    cb[i] = cost[col];
  }
  Eigen::PartialPivLU<Matrix> lu(basis_matrix);
  Vector xb = lu.solve(b);
  Vector y = lu.transpose().solve(cb);
  if (!xb.allFinite() || !y.allFinite()) {
    // fall back to the tableau values
    xb = tab.rhs();
    y = Vector::Zero(rows);
  }
  Vector full = Vector::Zero(cols);
  for (Eigen::Index i = 0; i < rows; ++i) full[tab.basis()[static_cast<size_t>(i)]] = xb[i];
  out.x = full.head(n).cwiseMax(0.0);
  out.objective = lp.objective.dot(out.x);
  out.duals = y;
  for (Eigen::Index i = 0; i < rows; ++i) out.duals[i] *= flip[static_cast<size_t>(i)];
  out.dual_objective = lp.b.dot(out.duals);
  out.status = LpStatus::Optimal;
  out.pivots = tab.pivots();
  return out;
}

}  // namespace cmdp_accel
