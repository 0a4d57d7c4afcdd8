#pragma once
// Independent reference computations for the tests. None of these reuse the
// library's linear solves or its simplex code.

#include "cmdp_accel/mdp_core.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace testing_support {

using cmdp_accel::Matrix;
using cmdp_accel::Policy;
using cmdp_accel::TabularCmdp;
using cmdp_accel::Vector;

// 1 state, |A| = rewards[0].size(); rewards[i][a].
inline TabularCmdp bandit(const std::vector<std::vector<double>>& rewards,
                          const std::vector<double>& thresholds, double gamma) {
  const int k = static_cast<int>(rewards.at(0).size());
  std::vector<Matrix> r;
  for (const auto& row : rewards) {
    Matrix m(1, k);
    for (int a = 0; a < k; ++a) m(0, a) = row[a];
    r.push_back(m);
  }
  Vector c(thresholds.size());
  for (size_t i = 0; i < thresholds.size(); ++i) c[i] = thresholds[i];
  return TabularCmdp(1, k, Matrix::Ones(k, 1), r, c, gamma, Vector::Ones(1));
}

// r_0 = (1, 0), r_1 = (0, 1), gamma = 0.5, c_1 = 1.2: V_0* = 0.8, nu* = (0.4, 0.6).
inline TabularCmdp binding_bandit() { return bandit({{1, 0}, {0, 1}}, {1.2}, 0.5); }

inline TabularCmdp random_cmdp(std::mt19937_64& rng, int n, int k, int m, double gamma,
                               double threshold = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix P(n * k, n);
  for (int r = 0; r < n * k; ++r) {
    for (int s = 0; s < n; ++s) P(r, s) = u(rng) + 1e-3;
    P.row(r) /= P.row(r).sum();
  }
  std::vector<Matrix> rewards;
  for (int i = 0; i <= m; ++i) {
    Matrix R(n, k);
    for (int s = 0; s < n; ++s) {
      for (int a = 0; a < k; ++a) R(s, a) = u(rng);
    }
    rewards.push_back(R);
  }
  Vector rho(n);
  for (int s = 0; s < n; ++s) rho[s] = u(rng) + 0.1;
  rho /= rho.sum();
  return TabularCmdp(n, k, P, rewards, Vector::Constant(m, threshold), gamma, rho);
}

inline Policy random_policy(std::mt19937_64& rng, int n, int k, double spread = 2.0) {
  std::normal_distribution<double> g(0.0, spread);
  Matrix logits(n, k);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < k; ++a) logits(s, a) = g(rng);
  }
  return Policy::softmax(logits, 1.0);
}

// Flat Dirichlet(1) rows, which reach near-deterministic policies too.
inline Policy simplex_policy(std::mt19937_64& rng, int n, int k) {
  std::exponential_distribution<double> e(1.0);
  Matrix p(n, k);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < k; ++a) p(s, a) = e(rng);
    p.row(s) /= p.row(s).sum();
  }
  return Policy(p);
}

// (1 - gamma) sum_{t <= horizon} gamma^t Pr(s_t = s, a_t = a) by forward
// propagation of the state distribution.
inline Matrix truncated_occupancy(const TabularCmdp& c, const Policy& pi, int horizon) {
  const int n = c.num_states(), k = c.num_actions();
  Vector d = c.initial_dist();
  Matrix nu = Matrix::Zero(n, k);
  double w = 1.0 - c.discount();
  for (int t = 0; t <= horizon; ++t) {
    Vector next = Vector::Zero(n);
    for (int s = 0; s < n; ++s) {
      for (int a = 0; a < k; ++a) {
        const double mass = d[s] * pi(s, a);
        nu(s, a) += w * mass;
        for (int s2 = 0; s2 < n; ++s2) next[s2] += mass * c.transition(s, a, s2);
      }
    }
    d = next;
    w *= c.discount();
  }
  return nu;
}

// sum_{t <= horizon} gamma^t E[H(pi(.|s_t))]
inline double truncated_entropy(const TabularCmdp& c, const Policy& pi, int horizon) {
  const Matrix nu = truncated_occupancy(c, pi, horizon);
  double h = 0.0;
  for (int s = 0; s < c.num_states(); ++s) {
    double row = 0.0;
    for (int a = 0; a < c.num_actions(); ++a) {
      if (pi(s, a) > 0) row -= pi(s, a) * std::log(pi(s, a));
    }
    h += nu.row(s).sum() * row;
  }
  return h / (1.0 - c.discount());
}

// Iterative policy evaluation (no linear solve) of reward r.
inline Vector iterate_values(const TabularCmdp& c, const Policy& pi, const Matrix& r,
                             int sweeps = 5000) {
  const int n = c.num_states(), k = c.num_actions();
  Vector v = Vector::Zero(n);
  for (int it = 0; it < sweeps; ++it) {
    Vector next(n);
    for (int s = 0; s < n; ++s) {
      double acc = 0.0;
      for (int a = 0; a < k; ++a) {
        double ev = 0.0;
        for (int s2 = 0; s2 < n; ++s2) ev += c.transition(s, a, s2) * v[s2];
        acc += pi(s, a) * (r(s, a) + c.discount() * ev);
      }
      next[s] = acc;
    }
    v = next;
  }
  return v;
}

// Howard policy iteration on reward r with iterative evaluation; returns rho^T V*.
inline double policy_iteration_value(const TabularCmdp& c, const Matrix& r) {
  const int n = c.num_states(), k = c.num_actions();
  std::vector<int> act(n, 0);
  Vector v;
  for (int round = 0; round < 100; ++round) {
    v = iterate_values(c, Policy::deterministic(act, k), r);
    bool changed = false;
    for (int s = 0; s < n; ++s) {
      int best = act[s];
      double best_q = -1e300;
      for (int a = 0; a < k; ++a) {
        double q = r(s, a);
        for (int s2 = 0; s2 < n; ++s2) q += c.discount() * c.transition(s, a, s2) * v[s2];
        if (q > best_q + 1e-12) {
          best_q = q;
          best = a;
        }
      }
      if (best != act[s]) {
        // only switch on strict improvement over the current action
        double cur = r(s, act[s]);
        for (int s2 = 0; s2 < n; ++s2) cur += c.discount() * c.transition(s, act[s], s2) * v[s2];
        if (best_q > cur + 1e-12) {
          act[s] = best;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  return c.initial_dist().dot(v);
}

// Minimizer of a unimodal f on [lo, hi]. Long double keeps the flat region
// around the minimum narrow: location error ~ sqrt(eps_ld) ~ 3e-10.
inline double golden_section(const std::function<long double(long double)>& f, double lo,
                             double hi, int iters = 300) {
  const long double g = (std::sqrt(5.0L) - 1.0L) / 2.0L;
  long double a = lo, b = hi;
  long double x1 = b - g * (b - a), x2 = a + g * (b - a);
  long double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters && b - a > 1e-18L; ++i) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    }
  }
  const long double mid = 0.5L * (a + b);
  // endpoints matter when the clamp is active
  long double best = mid, fb = f(mid);
  for (long double x : {static_cast<long double>(lo), static_cast<long double>(hi)}) {
    if (f(x) < fb) {
      fb = f(x);
      best = x;
    }
  }
  return static_cast<double>(best);
}

}  // namespace testing_support
