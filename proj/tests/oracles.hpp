#pragma once

// Reference computations for the test suite. Everything here is written
// against std::vector with plain Gaussian elimination so that it shares no
// code path with the library solvers it checks.

#include <cmath>
#include <deque>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "psconrl/cmdp.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

// Solves a x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve(Dense a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (std::abs(a[piv][col]) < 1e-300) throw std::runtime_error("singular");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return x;
}

inline Dense chain(const psconrl::Transitions& p, const Dense& pi) {
  const int S = p.n_states();
  Dense out(S, std::vector<double>(S, 0.0));
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < p.n_actions(); ++a) {
      for (int n = 0; n < S; ++n) out[s][n] += pi[s][a] * p(s, a, n);
    }
  }
  return out;
}

// Stationary distribution of an irreducible chain: d (P - I) = 0 with the
// last balance equation replaced by normalization.
inline std::vector<double> stationary(const Dense& P) {
  const std::size_t S = P.size();
  Dense a(S, std::vector<double>(S, 0.0));
  std::vector<double> b(S, 0.0);
  for (std::size_t eq = 0; eq + 1 < S; ++eq) {
    for (std::size_t s = 0; s < S; ++s) a[eq][s] = P[s][eq] - (s == eq ? 1.0 : 0.0);
  }
  for (std::size_t s = 0; s < S; ++s) a[S - 1][s] = 1.0;
  b[S - 1] = 1.0;
  return solve(a, b);
}

// Long-run average of `cost` under randomized policy `pi` (irreducible case).
inline double gain(const psconrl::Transitions& p, const Dense& pi,
                   const psconrl::CostMatrix& cost) {
  const std::vector<double> d = stationary(chain(p, pi));
  double g = 0.0;
  for (int s = 0; s < p.n_states(); ++s) {
    for (int a = 0; a < p.n_actions(); ++a) g += d[s] * pi[s][a] * cost(s, a);
  }
  return g;
}

// Expected steps to reach `target` under chain P (h(target) = 0).
inline std::vector<double> hitting_times(const Dense& P, int target) {
  const int S = static_cast<int>(P.size());
  Dense a(S, std::vector<double>(S, 0.0));
  std::vector<double> b(S, 0.0);
  for (int s = 0; s < S; ++s) {
    a[s][s] = 1.0;
    if (s == target) continue;
    for (int n = 0; n < S; ++n) {
      if (n != target) a[s][n] -= P[s][n];
    }
    b[s] = 1.0;
  }
  return solve(a, b);
}

inline Dense to_dense(const psconrl::StationaryPolicy& pi) {
  Dense out(pi.n_states(), std::vector<double>(pi.n_actions()));
  for (int s = 0; s < pi.n_states(); ++s) {
    for (int a = 0; a < pi.n_actions(); ++a) out[s][a] = pi.probs(s, a);
  }
  return out;
}

// Best feasible main-cost gain over pi(a1|s0) = x, pi(a1|s1) = y on a
// `step` grid for S = 2, A = 2, m = 1. Returns +inf when no grid point is
// feasible.
inline double grid_search_2x2(const psconrl::Cmdp& model, double step) {
  double best = INFINITY;
  const int n = static_cast<int>(std::lround(1.0 / step));
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const double x = i * step;
      const double y = j * step;
      const Dense pi = {{1.0 - x, x}, {1.0 - y, y}};
      const std::vector<double> d = stationary(chain(model.transitions, pi));
      double main = 0.0;
      double aux = 0.0;
      for (int s = 0; s < 2; ++s) {
        for (int a = 0; a < 2; ++a) {
          main += d[s] * pi[s][a] * model.costs[0](s, a);
          aux += d[s] * pi[s][a] * model.costs[1](s, a);
        }
      }
      if (aux <= model.thresholds[0] + 1e-12) best = std::min(best, main);
    }
  }
  return best;
}

// Breadth-first distances on the support graph of deterministic transitions,
// following edges backwards from `target`.
inline std::vector<int> bfs_to(const psconrl::Transitions& p, int target) {
  const int S = p.n_states();
  std::vector<int> dist(S, -1);
  dist[target] = 0;
  std::deque<int> queue{target};
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int s = 0; s < S; ++s) {
      if (dist[s] >= 0) continue;
      for (int a = 0; a < p.n_actions(); ++a) {
        if (p(s, a, v) > 0.0) {
          dist[s] = dist[v] + 1;
          queue.push_back(s);
          break;
        }
      }
    }
  }
  return dist;
}

// A CMDP with every transition probability positive (so every policy
// induces an irreducible chain) and costs uniform in [0, 1]. Thresholds are
// placed between the smallest and the uniform-policy value of each
// auxiliary cost so the problem is feasible.
inline psconrl::Cmdp random_dense_cmdp(std::mt19937_64& gen, int S, int A,
                                       int m) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::uniform_real_distribution<double> c(0.0, 1.0);
  psconrl::Transitions p(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      double total = 0.0;
      for (int n = 0; n < S; ++n) total += (p(s, a, n) = u(gen));
      for (int n = 0; n < S; ++n) p(s, a, n) /= total;
    }
  }
  psconrl::Cmdp model{p, {}, {}};
  for (int i = 0; i <= m; ++i) {
    psconrl::CostMatrix cost(S, A);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) cost(s, a) = c(gen);
    }
    model.costs.push_back(cost);
  }
  const Dense uniform(S, std::vector<double>(A, 1.0 / A));
  for (int i = 1; i <= m; ++i) {
    model.thresholds.push_back(gain(p, uniform, model.costs[i]));
  }
  return model;
}

// A sparse random model: each (s,a) reaches at most `fanout` successors,
// with a cycle 0 -> 1 -> ... -> S-1 -> 0 under action 0 to keep it
// communicating.
inline psconrl::Transitions random_sparse_communicating(std::mt19937_64& gen,
                                                        int S, int A,
                                                        int fanout) {
  std::uniform_int_distribution<int> pick(0, S - 1);
  std::uniform_real_distribution<double> w(0.1, 1.0);
  psconrl::Transitions p(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      std::vector<double> row(S, 0.0);
      if (a == 0) row[(s + 1) % S] = w(gen);
      for (int k = 0; k < fanout; ++k) row[pick(gen)] += w(gen);
      double total = 0.0;
      for (double x : row) total += x;
      for (int n = 0; n < S; ++n) p(s, a, n) = row[n] / total;
    }
  }
  return p;
}

}  // namespace oracle
