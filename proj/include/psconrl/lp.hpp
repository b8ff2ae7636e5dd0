#pragma once

// Dense two-phase primal simplex; Bland's rule guards against cycling.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "psconrl/error.hpp"

namespace psconrl {

enum class Sense { LessEqual, Equal, GreaterEqual };

// minimize objective . x  s.t.  constraint_matrix x (sense) constraint_rhs,
// x >= lower_bounds (zero when lower_bounds is empty).
struct LpProblem {
  Eigen::VectorXd objective;
  Eigen::MatrixXd constraint_matrix;
  Eigen::VectorXd constraint_rhs;
  std::vector<Sense> senses;
  Eigen::VectorXd lower_bounds;

  int n_variables() const noexcept {
    return static_cast<int>(objective.size());
  }
  int n_constraints() const noexcept {
    return static_cast<int>(constraint_rhs.size());
  }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

inline const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
  }
  return "?";
}

struct LpOutcome {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd solution;  // set when Optimal
  double objective_value = 0.0;
  double phase1_value = 0.0;  // sum of artificials at the end of phase 1
  std::int64_t iterations = 0;
};

struct LpOptions {
  double feas_tol = 1e-7;
  double opt_tol = 1e-8;
  // Zero means 50 * (n + k).
  std::int64_t max_iterations = 0;
};

namespace detail {

class Tableau {
 public:
  Tableau(int rows, int cols)
      : rows_(rows), cols_(cols), cells_(static_cast<std::size_t>(rows + 1) *
                                         (cols + 1), 0.0) {}

  // Row `rows_` holds reduced costs; column `cols_` holds the rhs.
  double& at(int r, int c) {
    return cells_[static_cast<std::size_t>(r) * (cols_ + 1) + c];
  }
  double at(int r, int c) const {
    return cells_[static_cast<std::size_t>(r) * (cols_ + 1) + c];
  }
  double& cost(int c) { return at(rows_, c); }
  double& rhs(int r) { return at(r, cols_); }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

  void pivot(int r, int e) {
    double* pr = &at(r, 0);
    const double inv = 1.0 / pr[e];
    for (int c = 0; c <= cols_; ++c) pr[c] *= inv;
    pr[e] = 1.0;
    for (int i = 0; i <= rows_; ++i) {
      if (i == r) continue;
      double* pi = &at(i, 0);
      const double f = pi[e];
      if (f == 0.0) continue;
      for (int c = 0; c <= cols_; ++c) pi[c] -= f * pr[c];
      pi[e] = 0.0;
    }
  }

  void drop_row(int r) {
    const std::size_t width = static_cast<std::size_t>(cols_ + 1);
    cells_.erase(cells_.begin() + static_cast<std::ptrdiff_t>(r * width),
                 cells_.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
    --rows_;
  }

 private:
  int rows_;
  int cols_;
  std::vector<double> cells_;
};

inline constexpr double kPivotTolerance = 1e-9;
inline constexpr double kReducedCostTolerance = 1e-10;
inline constexpr std::int64_t kReinvertInterval = 50;
inline constexpr std::int64_t kBlandAfter = 50;
inline constexpr double kHarrisSlack = 1e-9;

}  // namespace detail

inline LpOutcome solve_lp(const LpProblem& problem,
                          const LpOptions& options = {}) {
  using detail::Tableau;
  const int n = problem.n_variables();
  const int k = problem.n_constraints();
  if (problem.constraint_matrix.rows() != k ||
      problem.constraint_matrix.cols() != n ||
      static_cast<int>(problem.senses.size()) != k ||
      (problem.lower_bounds.size() != 0 && problem.lower_bounds.size() != n)) {
    throw DimensionError("solve_lp: inconsistent problem dimensions");
  }
  if (!problem.objective.allFinite() ||
      !problem.constraint_matrix.allFinite() ||
      !problem.constraint_rhs.allFinite() ||
      (problem.lower_bounds.size() != 0 && !problem.lower_bounds.allFinite())) {
    throw InputError("solve_lp: non-finite input");
  }

  const Eigen::VectorXd lower = problem.lower_bounds.size() == 0
                                    ? Eigen::VectorXd::Zero(n)
                                    : problem.lower_bounds;

  // Standard form: shift x = x' + lower, make every rhs nonnegative.
  Eigen::MatrixXd a = problem.constraint_matrix;
  Eigen::VectorXd b = problem.constraint_rhs - a * lower;
  std::vector<Sense> senses = problem.senses;
  for (int i = 0; i < k; ++i) {
    if (b(i) < 0.0) {
      a.row(i) *= -1.0;
      b(i) = -b(i);
      if (senses[i] == Sense::LessEqual) {
        senses[i] = Sense::GreaterEqual;
      } else if (senses[i] == Sense::GreaterEqual) {
        senses[i] = Sense::LessEqual;
      }
    }
  }

  int n_slack = 0;
  int n_art = 0;
  for (Sense sense : senses) {
    if (sense != Sense::Equal) ++n_slack;
    if (sense != Sense::LessEqual) ++n_art;
  }
  const int first_slack = n;
  const int first_art = n + n_slack;
  const int cols = n + n_slack + n_art;

  // Full standardized system [A | slack | artificial], kept for reinversion.
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(k, cols);
  full.leftCols(n) = a;
  std::vector<int> basis(static_cast<std::size_t>(k));
  {
    int slack = first_slack;
    int art = first_art;
    for (int i = 0; i < k; ++i) {
      switch (senses[i]) {
        case Sense::LessEqual:
          full(i, slack) = 1.0;
          basis[i] = slack++;
          break;
        case Sense::GreaterEqual:
          full(i, slack++) = -1.0;
          full(i, art) = 1.0;
          basis[i] = art++;
          break;
        case Sense::Equal:
          full(i, art) = 1.0;
          basis[i] = art++;
          break;
      }
    }
  }
  std::vector<int> kept(static_cast<std::size_t>(k));  // original row of each tableau row
  for (int i = 0; i < k; ++i) kept[i] = i;

  Tableau tab(k, cols);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < cols; ++j) tab.at(i, j) = full(i, j);
    tab.rhs(i) = b(i);
  }

  const std::int64_t max_iterations =
      options.max_iterations > 0 ? options.max_iterations
                                 : 50LL * static_cast<std::int64_t>(n + k);
  LpOutcome outcome;

  auto load_costs = [&](auto&& column_cost) {
    for (int j = 0; j <= cols; ++j) tab.cost(j) = 0.0;
    for (int j = 0; j < cols; ++j) tab.cost(j) = column_cost(j);
    for (int i = 0; i < tab.rows(); ++i) {
      const double cb = column_cost(basis[i]);
      if (cb == 0.0) continue;
      for (int j = 0; j <= cols; ++j) tab.cost(j) -= cb * tab.at(i, j);
    }
  };

  // Rebuilds the tableau as B^-1 [full | b] for the current basis, discarding
  // round-off accumulated by the pivots.
  auto reinvert = [&](auto&& column_cost) {
    const int m = tab.rows();
    if (m == 0) return;
    Eigen::MatrixXd basis_matrix(m, m);
    Eigen::MatrixXd rows(m, cols + 1);
    for (int i = 0; i < m; ++i) {
      for (int r = 0; r < m; ++r) basis_matrix(r, i) = full(kept[r], basis[i]);
      rows.row(i).head(cols) = full.row(kept[i]);
      rows(i, cols) = b(kept[i]);
    }
    const auto lu = basis_matrix.fullPivLu();
    if (!lu.isInvertible()) return;  // keep the updated tableau
    const Eigen::MatrixXd fresh = lu.solve(rows);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j <= cols; ++j) tab.at(i, j) = fresh(i, j);
    }
    load_costs(column_cost);
  };

  // Pivots on columns [0, allowed_cols) until optimal. Returns false when
  // the problem is unbounded along some entering column. Both terminal
  // verdicts are confirmed on a freshly reinverted tableau.
  //
  // Pricing is Dantzig's rule; after kBlandAfter consecutive degenerate
  // pivots it switches to Bland's rule (first improving column, lowest basis
  // index among tied rows) until the objective moves again, which rules out
  // cycling. The ratio test is Harris's two-pass variant.
  auto iterate = [&](int allowed_cols, auto&& column_cost) -> bool {
    std::int64_t since_reinvert = 0;
    std::int64_t degenerate_run = 0;
    std::vector<double> col_max(static_cast<std::size_t>(allowed_cols));
    for (;;) {
      const bool bland = degenerate_run >= detail::kBlandAfter;
      // A reduced cost counts as negative only relative to the scale of
      // its column; smaller values are round-off.
      int enter = -1;
      double best_score = 0.0;
      for (int j = 0; j < allowed_cols; ++j) {
        const double rc = tab.cost(j);
        if (rc >= -detail::kReducedCostTolerance) continue;
        double cm = 0.0;
        for (int i = 0; i < tab.rows(); ++i) {
          cm = std::max(cm, std::abs(tab.at(i, j)));
        }
        col_max[static_cast<std::size_t>(j)] = cm;
        if (rc >= -options.opt_tol * (1.0 + cm)) continue;
        const double score = rc / (1.0 + cm);
        if (enter < 0 || score < best_score) {
          enter = j;
          best_score = score;
        }
        if (bland) break;
      }
      int leave = -1;
      double step = 0.0;
      if (enter >= 0) {
        const double pivot_tol = std::max(
            detail::kPivotTolerance,
            1e-6 * col_max[static_cast<std::size_t>(enter)]);
        double bound = std::numeric_limits<double>::infinity();
        for (int i = 0; i < tab.rows(); ++i) {
          const double coef = tab.at(i, enter);
          if (coef <= pivot_tol) continue;
          bound = std::min(
              bound, (std::max(0.0, tab.rhs(i)) + detail::kHarrisSlack) / coef);
        }
        for (int i = 0; i < tab.rows(); ++i) {
          const double coef = tab.at(i, enter);
          if (coef <= pivot_tol) continue;
          const double ratio = std::max(0.0, tab.rhs(i)) / coef;
          if (ratio > bound) continue;
          const bool better =
              leave < 0 ||
              (bland ? basis[i] < basis[leave]
                     : coef > tab.at(leave, enter));
          if (better) {
            leave = i;
            step = ratio;
          }
        }
      }
      if (enter < 0 || leave < 0) {
        if (since_reinvert > 0) {
          reinvert(column_cost);
          since_reinvert = 0;
          continue;
        }
        return enter < 0;
      }
      if (++outcome.iterations > max_iterations) {
        throw SolverStall("solve_lp: iteration limit " +
                          std::to_string(max_iterations) + " exceeded");
      }
      degenerate_run = step * std::abs(tab.cost(enter)) > 1e-12
                           ? 0
                           : degenerate_run + 1;
      tab.pivot(leave, enter);
      basis[leave] = enter;
      if (++since_reinvert >= detail::kReinvertInterval) {
        reinvert(column_cost);
        since_reinvert = 0;
      }
    }
  };

  // Phase 1: minimize the sum of artificials.
  if (n_art > 0) {
    const auto phase1_cost = [&](int j) { return j >= first_art ? 1.0 : 0.0; };
    load_costs(phase1_cost);
    iterate(cols, phase1_cost);
    outcome.phase1_value = -tab.cost(cols);
    if (outcome.phase1_value > options.feas_tol) {
      outcome.status = LpStatus::Infeasible;
      return outcome;
    }
    // Drive zero-valued artificials out of the basis; rows where that is
    // impossible are linearly dependent and are dropped.
    for (int i = 0; i < tab.rows();) {
      if (basis[i] < first_art) {
        ++i;
        continue;
      }
      int enter = -1;
      double best = detail::kPivotTolerance;
      for (int j = 0; j < first_art; ++j) {
        if (std::abs(tab.at(i, j)) > best) {
          best = std::abs(tab.at(i, j));
          enter = j;
        }
      }
      if (enter >= 0) {
        tab.pivot(i, enter);
        basis[i] = enter;
        ++i;
      } else {
        tab.drop_row(i);
        basis.erase(basis.begin() + i);
        kept.erase(kept.begin() + i);
      }
    }
  }

  // Phase 2 on the original objective; artificial columns never re-enter.
  const auto phase2_cost = [&](int j) {
    return j < n ? problem.objective(j) : 0.0;
  };
  load_costs(phase2_cost);
  if (!iterate(first_art, phase2_cost)) {
    outcome.status = LpStatus::Unbounded;
    return outcome;
  }

  // Recover the basic solution from the standardized system directly; this
  // removes the round-off accumulated by the tableau updates.
  Eigen::VectorXd xs = Eigen::VectorXd::Zero(first_art);
  const int m = tab.rows();
  bool polished = false;
  if (m > 0) {
    Eigen::MatrixXd basis_cols(k, m);
    for (int i = 0; i < m; ++i) basis_cols.col(i) = full.col(basis[i]);
    // Least squares on the full (possibly redundant) row set is exact when
    // the system is consistent, which phase 1 established.
    const Eigen::VectorXd xb = basis_cols.colPivHouseholderQr().solve(b);
    if (xb.allFinite() && (basis_cols * xb - b).cwiseAbs().maxCoeff() <=
                              0.1 * options.feas_tol) {
      for (int i = 0; i < m; ++i) xs(basis[i]) = xb(i);
      polished = true;
    }
  }
  if (!polished) {
    for (int i = 0; i < m; ++i) {
      if (basis[i] < first_art) xs(basis[i]) = tab.rhs(i);
    }
  }
  for (int j = 0; j < first_art; ++j) {
    if (xs(j) < 0.0 && xs(j) > -options.feas_tol) xs(j) = 0.0;
  }

  outcome.status = LpStatus::Optimal;
  outcome.solution = xs.head(n) + lower;
  outcome.objective_value = problem.objective.dot(outcome.solution);
  return outcome;
}

// Largest violation of the constraints and bounds at x; used by tests and
// by callers that want to double-check a returned point.
inline double max_constraint_violation(const LpProblem& problem,
                                       const Eigen::VectorXd& x) {
  double worst = 0.0;
  const Eigen::VectorXd ax = problem.constraint_matrix * x;
  for (int i = 0; i < problem.n_constraints(); ++i) {
    const double r = ax(i) - problem.constraint_rhs(i);
    switch (problem.senses[i]) {
      case Sense::LessEqual: worst = std::max(worst, r); break;
      case Sense::GreaterEqual: worst = std::max(worst, -r); break;
      case Sense::Equal: worst = std::max(worst, std::abs(r)); break;
    }
  }
  for (int j = 0; j < problem.n_variables(); ++j) {
    const double lb =
        problem.lower_bounds.size() == 0 ? 0.0 : problem.lower_bounds(j);
    worst = std::max(worst, lb - x(j));
  }
  return worst;
}

}  // namespace psconrl
