#pragma once

// Occupancy-measure linear program of an average-cost CMDP:
//
//   min_mu  sum mu(s,a) c0(s,a)
//   s.t.    sum mu(s,a) ci(s,a) <= tau_i                       i = 1..m
//           sum_a mu(s,a) = sum_{s',a} mu(s',a) p(s|s',a)        every s
//           sum mu(s,a) = 1,  mu >= 0

#include <optional>
#include <vector>

#include "psconrl/cmdp.hpp"
#include "psconrl/lp.hpp"

namespace psconrl {

struct CmdpSolution {
  OccupancyMeasure occupancy;
  StationaryPolicy policy;
  double objective_value = 0.0;
  std::vector<double> constraint_values;
};

struct CmdpSolveOptions {
  // Index of the flow-conservation row removed before solving; the S flow
  // rows together with the normalization row are rank deficient.
  int dropped_flow_row = 0;
  LpOptions lp;
};

namespace detail {

inline void require_valid(const Cmdp& model, const char* who) {
  const ValidationReport report = validate_cmdp(model);
  if (!report.ok()) {
    throw InputError(std::string(who) + ": invalid model\n" +
                     describe(report));
  }
}

// Rows: [budgets (if any) | S flow rows | normalization].
inline LpProblem occupancy_lp(const Cmdp& model, const CostMatrix& objective,
                              bool with_budgets) {
  const int S = model.n_states();
  const int A = model.n_actions();
  const int m = with_budgets ? model.n_constraints() : 0;
  const int n = S * A;
  const int k = m + S + 1;

  LpProblem lp;
  lp.objective.resize(n);
  lp.constraint_matrix = Eigen::MatrixXd::Zero(k, n);
  lp.constraint_rhs = Eigen::VectorXd::Zero(k);
  lp.senses.assign(static_cast<std::size_t>(k), Sense::Equal);

  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) lp.objective(s * A + a) = objective(s, a);
  }
  for (int i = 0; i < m; ++i) {
    const CostMatrix& c = model.costs[static_cast<std::size_t>(i) + 1];
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) lp.constraint_matrix(i, s * A + a) = c(s, a);
    }
    lp.constraint_rhs(i) = model.thresholds[static_cast<std::size_t>(i)];
    lp.senses[static_cast<std::size_t>(i)] = Sense::LessEqual;
  }
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const int col = s * A + a;
      lp.constraint_matrix(m + s, col) += 1.0;
      const auto row = model.transitions.row(s, a);
      for (int next = 0; next < S; ++next) {
        lp.constraint_matrix(m + next, col) -= row[next];
      }
    }
  }
  lp.constraint_matrix.row(k - 1).setOnes();
  lp.constraint_rhs(k - 1) = 1.0;
  return lp;
}

inline LpProblem drop_row(const LpProblem& lp, int row) {
  LpProblem out;
  const int k = lp.n_constraints();
  out.objective = lp.objective;
  out.lower_bounds = lp.lower_bounds;
  out.constraint_matrix.resize(k - 1, lp.n_variables());
  out.constraint_rhs.resize(k - 1);
  for (int i = 0, r = 0; i < k; ++i) {
    if (i == row) continue;
    out.constraint_matrix.row(r) = lp.constraint_matrix.row(i);
    out.constraint_rhs(r) = lp.constraint_rhs(i);
    out.senses.push_back(lp.senses[static_cast<std::size_t>(i)]);
    ++r;
  }
  return out;
}

inline CmdpSolution package(const Cmdp& model, const Eigen::VectorXd& x,
                            int objective_index) {
  const int S = model.n_states();
  const int A = model.n_actions();
  CmdpSolution sol;
  sol.occupancy.mu.resize(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      sol.occupancy.mu(s, a) = std::max(0.0, x(s * A + a));
    }
  }
  sol.policy = policy_from_occupancy(sol.occupancy);
  const Matrix& mu = sol.occupancy.mu;
  sol.objective_value =
      mu.cwiseProduct(model.costs[static_cast<std::size_t>(objective_index)])
          .sum();
  for (int i = 1; i <= model.n_constraints(); ++i) {
    sol.constraint_values.push_back(
        mu.cwiseProduct(model.costs[static_cast<std::size_t>(i)]).sum());
  }
  return sol;
}

}  // namespace detail

// Variables are mu(s,a) at index s * A + a. All S flow rows are emitted.
inline LpProblem build_cmdp_lp(const Cmdp& model) {
  detail::require_valid(model, "build_cmdp_lp");
  return detail::occupancy_lp(model, model.costs.front(), true);
}

// Optimal stationary policy of the CMDP, or nullopt when no policy meets the
// budgets. Solver stalls propagate as SolverStall.
inline std::optional<CmdpSolution> solve_constrained(
    const Cmdp& model, const CmdpSolveOptions& options = {}) {
  detail::require_valid(model, "solve_constrained");
  const int S = model.n_states();
  if (options.dropped_flow_row < 0 || options.dropped_flow_row >= S) {
    throw InputError("solve_constrained: dropped_flow_row out of range");
  }
  const LpProblem full = detail::occupancy_lp(model, model.costs.front(), true);
  const LpProblem lp =
      detail::drop_row(full, model.n_constraints() + options.dropped_flow_row);
  const LpOutcome outcome = solve_lp(lp, options.lp);
  switch (outcome.status) {
    case LpStatus::Infeasible:
      return std::nullopt;
    case LpStatus::Unbounded:
      // The feasible set lies in the probability simplex.
      throw Error("solve_constrained: LP reported unbounded");
    case LpStatus::Optimal:
      break;
  }
  return detail::package(model, outcome.solution, 0);
}

// Average-cost optimum of a single cost component with the budgets ignored.
inline CmdpSolution solve_unconstrained(const Cmdp& model, int cost_index,
                                       const CmdpSolveOptions& options = {}) {
  detail::require_valid(model, "solve_unconstrained");
  if (cost_index < 0 || cost_index > model.n_constraints()) {
    throw InputError("solve_unconstrained: cost_index out of range");
  }
  const int S = model.n_states();
  if (options.dropped_flow_row < 0 || options.dropped_flow_row >= S) {
    throw InputError("solve_unconstrained: dropped_flow_row out of range");
  }
  const LpProblem full = detail::occupancy_lp(
      model, model.costs[static_cast<std::size_t>(cost_index)], false);
  const LpProblem lp = detail::drop_row(full, options.dropped_flow_row);
  const LpOutcome outcome = solve_lp(lp, options.lp);
  if (outcome.status != LpStatus::Optimal) {
    throw Error(std::string("solve_unconstrained: LP reported ") +
                to_string(outcome.status));
  }
  return detail::package(model, outcome.solution, cost_index);
}

}  // namespace psconrl
