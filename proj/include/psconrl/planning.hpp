#pragma once

// Average-cost dynamic programming over a known (or sampled) kernel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "psconrl/cmdp.hpp"

namespace psconrl {

// Optimal average cost J*, min-normalized bias v* and the greedy policy.
struct AvgCostSolution {
  double gain = 0.0;
  Vector bias;
  StationaryPolicy greedy_policy;
  std::int64_t iterations = 0;
};

// Gain J^pi, min-normalized bias v^pi and the stationary distribution of an
// irreducible chain.
struct PolicyEvaluation {
  double gain = 0.0;
  Vector bias;
  Vector stationary_distribution;
};

struct RviOptions {
  // Stop once the span of successive value differences drops below this.
  // Non-positive means 1e-9 * S.
  double tolerance = 0.0;
  // Self-loop blend of the aperiodicity transform
  // p~(.|s,a) = (1 - theta) e_s + theta p(.|s,a), c~ = theta c.
  double aperiodicity = 0.99;
  std::int64_t max_iterations = 1'000'000;
};

inline double default_rvi_tolerance(int n_states) { return 1e-9 * n_states; }

// Unit cost everywhere except in the target state.
inline CostMatrix exploration_cost(int n_states, int n_actions, int target) {
  if (target < 0 || target >= n_states) {
    throw InputError("exploration_cost: target " + std::to_string(target) +
                     " out of range");
  }
  CostMatrix c = CostMatrix::Ones(n_states, n_actions);
  c.row(target).setZero();
  return c;
}

namespace detail {

// Forward reachability in the graph with an edge s -> s' whenever some
// action (or the given chain) moves s to s' with positive probability.
inline std::vector<char> reachable_from(
    int source, int n, const std::vector<std::vector<int>>& edges) {
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::deque<int> queue{source};
  seen[static_cast<std::size_t>(source)] = 1;
  while (!queue.empty()) {
    const int s = queue.front();
    queue.pop_front();
    for (int next : edges[static_cast<std::size_t>(s)]) {
      if (!seen[static_cast<std::size_t>(next)]) {
        seen[static_cast<std::size_t>(next)] = 1;
        queue.push_back(next);
      }
    }
  }
  return seen;
}

inline std::vector<std::vector<int>> support_graph(const Transitions& p,
                                                   bool reverse) {
  const int S = p.n_states();
  std::vector<std::vector<int>> edges(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    for (int next = 0; next < S; ++next) {
      for (int a = 0; a < p.n_actions(); ++a) {
        if (p(s, a, next) > 0.0) {
          if (reverse) {
            edges[static_cast<std::size_t>(next)].push_back(s);
          } else {
            edges[static_cast<std::size_t>(s)].push_back(next);
          }
          break;
        }
      }
    }
  }
  return edges;
}

inline std::vector<std::vector<int>> chain_graph(const Matrix& chain,
                                                 bool reverse) {
  const auto S = static_cast<int>(chain.rows());
  std::vector<std::vector<int>> edges(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    for (int next = 0; next < S; ++next) {
      if (chain(s, next) > 0.0) {
        edges[static_cast<std::size_t>(reverse ? next : s)].push_back(
            reverse ? s : next);
      }
    }
  }
  return edges;
}

inline bool all_set(const std::vector<char>& flags) {
  return std::all_of(flags.begin(), flags.end(), [](char f) { return f; });
}

inline std::string format_states(const std::vector<int>& states) {
  std::string out = "{";
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(states[i]);
  }
  return out + "}";
}

}  // namespace detail

// Some policy reaches `target` from every state.
inline bool target_reachable(const Transitions& p, int target) {
  return detail::all_set(
      detail::reachable_from(target, p.n_states(),
                             detail::support_graph(p, /*reverse=*/true)));
}

inline bool is_communicating(const Transitions& p) {
  if (p.n_states() == 0) return false;
  return target_reachable(p, 0) &&
         detail::all_set(detail::reachable_from(
             0, p.n_states(), detail::support_graph(p, /*reverse=*/false)));
}

// Closed communicating classes of a Markov chain, each sorted ascending.
inline std::vector<std::vector<int>> closed_classes(const Matrix& chain) {
  const auto S = static_cast<int>(chain.rows());
  const auto edges = detail::chain_graph(chain, false);
  std::vector<std::vector<char>> reach;
  reach.reserve(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) reach.push_back(detail::reachable_from(s, S, edges));

  std::vector<std::vector<int>> classes;
  std::vector<char> assigned(static_cast<std::size_t>(S), 0);
  for (int s = 0; s < S; ++s) {
    if (assigned[static_cast<std::size_t>(s)]) continue;
    std::vector<int> members;
    bool closed = true;
    for (int t = 0; t < S; ++t) {
      const bool fwd = reach[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)];
      const bool back = reach[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)];
      if (fwd && back) {
        members.push_back(t);
      } else if (fwd) {
        closed = false;
      }
    }
    for (int t : members) assigned[static_cast<std::size_t>(t)] = 1;
    if (closed) classes.push_back(std::move(members));
  }
  return classes;
}

// The transformed model of the aperiodicity transform (kernel and cost).
inline Transitions aperiodic_transitions(const Transitions& p, double theta) {
  Transitions out = p;
  for (int s = 0; s < p.n_states(); ++s) {
    for (int a = 0; a < p.n_actions(); ++a) {
      auto row = out.row(s, a);
      for (double& x : row) x *= theta;
      row[static_cast<std::size_t>(s)] += 1.0 - theta;
    }
  }
  return out;
}

// Solves J + v(s) = min_a { c(s,a) + sum_s' p(s'|s,a) v(s') } by relative
// value iteration on the aperiodicity-transformed model. The transformed
// model has gain theta * J and the same bias; both are mapped back.
inline AvgCostSolution relative_value_iteration(const Transitions& p,
                                                const CostMatrix& cost,
                                                const RviOptions& options = {}) {
  const int S = p.n_states();
  const int A = p.n_actions();
  if (cost.rows() != S || cost.cols() != A) {
    throw DimensionError("relative_value_iteration: cost shape mismatch");
  }
  const double theta = options.aperiodicity;
  if (!(theta > 0.0 && theta < 1.0)) {
    throw InputError("relative_value_iteration: aperiodicity must be in (0,1)");
  }
  const double tol = options.tolerance > 0.0 ? options.tolerance
                                             : default_rvi_tolerance(S);
  // Residuals on the original model are those of the transformed one
  // divided by theta; the extra margin keeps them within `tol`.
  const double stop = 0.5 * tol * theta;

  // Nonzero successors of every (s,a), flattened in [s][a] order.
  std::vector<int> succ_begin(static_cast<std::size_t>(S) * A + 1, 0);
  std::vector<int> succ_state;
  std::vector<double> succ_prob;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const auto row = p.row(s, a);
      for (int next = 0; next < S; ++next) {
        if (row[next] != 0.0) {
          succ_state.push_back(next);
          succ_prob.push_back(row[next]);
        }
      }
      succ_begin[static_cast<std::size_t>(s) * A + a + 1] =
          static_cast<int>(succ_state.size());
    }
  }

  Vector v = Vector::Zero(S);
  Vector w(S);
  AvgCostSolution sol;
  double lo = 0.0;
  double hi = 0.0;
  for (std::int64_t it = 1;; ++it) {
    if (it > options.max_iterations) {
      throw NonConvergence("relative_value_iteration: no convergence after " +
                           std::to_string(options.max_iterations) +
                           " iterations (model not communicating?)");
    }
    for (int s = 0; s < S; ++s) {
      double best = INFINITY;
      for (int a = 0; a < A; ++a) {
        const std::size_t sa = static_cast<std::size_t>(s) * A + a;
        double expect = 0.0;
        for (int j = succ_begin[sa]; j < succ_begin[sa + 1]; ++j) {
          expect += succ_prob[static_cast<std::size_t>(j)] *
                    v(succ_state[static_cast<std::size_t>(j)]);
        }
        const double q = theta * (cost(s, a) + expect) + (1.0 - theta) * v(s);
        best = std::min(best, q);
      }
      w(s) = best;
    }
    lo = INFINITY;
    hi = -INFINITY;
    for (int s = 0; s < S; ++s) {
      const double d = w(s) - v(s);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    v = w.array() - w(0);
    if (hi - lo < stop) {
      sol.iterations = it;
      break;
    }
  }

  sol.gain = 0.5 * (lo + hi) / theta;
  sol.bias = v.array() - v.minCoeff();
  sol.greedy_policy.probs = Matrix::Zero(S, A);
  for (int s = 0; s < S; ++s) {
    std::vector<double> q(static_cast<std::size_t>(A));
    double best = INFINITY;
    for (int a = 0; a < A; ++a) {
      const auto row = p.row(s, a);
      double expect = 0.0;
      for (int next = 0; next < S; ++next) expect += row[next] * sol.bias(next);
      q[static_cast<std::size_t>(a)] = cost(s, a) + expect;
      best = std::min(best, q[static_cast<std::size_t>(a)]);
    }
    const double tie = 1e-9 * (1.0 + std::abs(best));
    for (int a = 0; a < A; ++a) {
      if (q[static_cast<std::size_t>(a)] <= best + tie) {
        sol.greedy_policy.probs(s, a) = 1.0;
        break;
      }
    }
  }
  return sol;
}

// Largest |J + v(s) - min_a(c + P v)| over states.
inline double bellman_residual(const Transitions& p, const CostMatrix& cost,
                               double gain, const Vector& bias) {
  double worst = 0.0;
  for (int s = 0; s < p.n_states(); ++s) {
    double best = INFINITY;
    for (int a = 0; a < p.n_actions(); ++a) {
      const auto row = p.row(s, a);
      double expect = 0.0;
      for (int next = 0; next < p.n_states(); ++next) {
        expect += row[next] * bias(next);
      }
      best = std::min(best, cost(s, a) + expect);
    }
    worst = std::max(worst, std::abs(gain + bias(s) - best));
  }
  return worst;
}

// Greedy policy of the exploration MDP for `target` (the shortest-path
// policy towards it).
inline StationaryPolicy shortest_path_policy(const Transitions& p, int target,
                                             const RviOptions& options = {}) {
  const CostMatrix cost = exploration_cost(p.n_states(), p.n_actions(), target);
  if (!target_reachable(p, target)) {
    throw NonConvergence("shortest_path_policy: state " +
                         std::to_string(target) +
                         " is not reachable from every state");
  }
  return relative_value_iteration(p, cost, options).greedy_policy;
}

// Minimal expected hitting times of `target` as the bias of the exploration
// MDP in which `target` is made absorbing. The hitting times do not depend on
// what happens after arrival, and the absorbing target pins J* = 0, so the
// min-normalized bias is exactly the vector of hitting times.
inline AvgCostSolution min_hitting_times(const Transitions& p, int target,
                                         const RviOptions& options = {}) {
  if (target < 0 || target >= p.n_states()) {
    throw InputError("min_hitting_times: target out of range");
  }
  if (!target_reachable(p, target)) {
    throw NotCommunicating("min_hitting_times: state " +
                           std::to_string(target) +
                           " is not reachable from every state");
  }
  Transitions absorbing = p;
  for (int a = 0; a < p.n_actions(); ++a) {
    auto row = absorbing.row(target, a);
    std::fill(row.begin(), row.end(), 0.0);
    row[static_cast<std::size_t>(target)] = 1.0;
  }
  return relative_value_iteration(
      absorbing, exploration_cost(p.n_states(), p.n_actions(), target),
      options);
}

// D(p): the largest minimal expected travel time between two distinct states.
inline double diameter(const Transitions& p, const RviOptions& options = {}) {
  if (!is_communicating(p)) {
    throw NotCommunicating("diameter: model is not communicating");
  }
  double d = 0.0;
  for (int target = 0; target < p.n_states(); ++target) {
    const AvgCostSolution sol = min_hitting_times(p, target, options);
    for (int s = 0; s < p.n_states(); ++s) {
      if (s != target) d = std::max(d, sol.bias(s));
    }
  }
  return d;
}

// Linear-system hitting times of `target` under a fixed policy:
// h(target) = 0, h(s) = 1 + sum_s' P[s,s'] h(s').
inline Vector expected_hitting_times(const Transitions& p,
                                     const StationaryPolicy& pi, int target) {
  const int S = p.n_states();
  if (target < 0 || target >= S) {
    throw InputError("expected_hitting_times: target out of range");
  }
  const Matrix chain = induced_chain(p, pi);
  const auto back =
      detail::reachable_from(target, S, detail::chain_graph(chain, true));
  std::vector<int> stuck;
  for (int s = 0; s < S; ++s) {
    if (!back[static_cast<std::size_t>(s)]) stuck.push_back(s);
  }
  if (!stuck.empty()) {
    throw UnreachableTarget("expected_hitting_times: target " +
                            std::to_string(target) + " unreachable from " +
                            detail::format_states(stuck));
  }
  Vector h = Vector::Zero(S);
  if (S == 1) return h;
  std::vector<int> others;
  for (int s = 0; s < S; ++s) {
    if (s != target) others.push_back(s);
  }
  const auto n = static_cast<Eigen::Index>(others.size());
  Matrix system = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      system(i, j) -= chain(others[static_cast<std::size_t>(i)],
                            others[static_cast<std::size_t>(j)]);
    }
  }
  const Vector solved = system.fullPivLu().solve(Vector::Ones(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    h(others[static_cast<std::size_t>(i)]) = solved(i);
  }
  return h;
}

// Stationary distribution of an irreducible chain.
inline Vector stationary_distribution(const Matrix& chain) {
  const auto S = chain.rows();
  Matrix system = chain.transpose() - Matrix::Identity(S, S);
  system.row(S - 1).setOnes();
  Vector rhs = Vector::Zero(S);
  rhs(S - 1) = 1.0;
  return system.fullPivLu().solve(rhs);
}

inline PolicyEvaluation policy_gain(const Transitions& p,
                                    const StationaryPolicy& pi,
                                    const CostMatrix& cost) {
  const int S = p.n_states();
  if (cost.rows() != S || cost.cols() != p.n_actions()) {
    throw DimensionError("policy_gain: cost shape mismatch");
  }
  const Matrix chain = induced_chain(p, pi);
  const auto classes = closed_classes(chain);
  if (classes.size() != 1 || static_cast<int>(classes.front().size()) != S) {
    std::string found;
    for (const auto& c : classes) found += " " + detail::format_states(c);
    throw EvaluationError("policy_gain: induced chain is not irreducible; "
                          "closed classes:" + found);
  }
  PolicyEvaluation eval;
  eval.stationary_distribution = stationary_distribution(chain);
  const Vector c_pi = policy_cost(cost, pi);
  eval.gain = eval.stationary_distribution.dot(c_pi);

  // [I - P, 1; e_0', 0] [v; J] = [c_pi; 0]
  Matrix system = Matrix::Zero(S + 1, S + 1);
  system.topLeftCorner(S, S) = Matrix::Identity(S, S) - chain;
  system.topRightCorner(S, 1).setOnes();
  system(S, 0) = 1.0;
  Vector rhs = Vector::Zero(S + 1);
  rhs.head(S) = c_pi;
  const Vector sol = system.fullPivLu().solve(rhs);
  eval.bias = sol.head(S).array() - sol.head(S).minCoeff();
  return eval;
}

}  // namespace psconrl
