#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "psconrl/error.hpp"

namespace psconrl {

// Row-major so that per-state rows are contiguous spans.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Cost (or any per state-action quantity) laid out as rows = states,
// columns = actions.
using CostMatrix = Matrix;

// Transition kernel p(s'|s,a), stored densely in [s][a][s'] order.
class Transitions {
 public:
  Transitions() = default;
  Transitions(int n_states, int n_actions, double fill = 0.0)
      : n_states_(n_states),
        n_actions_(n_actions),
        p_(static_cast<std::size_t>(n_states) * n_actions * n_states, fill) {}

  int n_states() const noexcept { return n_states_; }
  int n_actions() const noexcept { return n_actions_; }

  double& operator()(int s, int a, int next) { return p_[index(s, a, next)]; }
  double operator()(int s, int a, int next) const {
    return p_[index(s, a, next)];
  }

  std::span<double> row(int s, int a) {
    return {p_.data() + index(s, a, 0), static_cast<std::size_t>(n_states_)};
  }
  std::span<const double> row(int s, int a) const {
    return {p_.data() + index(s, a, 0), static_cast<std::size_t>(n_states_)};
  }

  std::span<const double> data() const noexcept { return p_; }

  bool operator==(const Transitions&) const = default;

 private:
  std::size_t index(int s, int a, int next) const {
    return (static_cast<std::size_t>(s) * n_actions_ + a) * n_states_ + next;
  }

  int n_states_ = 0;
  int n_actions_ = 0;
  std::vector<double> p_;
};

// A constrained MDP. costs[0] is the main cost c0, costs[i] for i >= 1 the
// auxiliary costs whose long-run averages are bounded by thresholds[i - 1].
struct Cmdp {
  Transitions transitions;
  std::vector<CostMatrix> costs;
  std::vector<double> thresholds;

  int n_states() const noexcept { return transitions.n_states(); }
  int n_actions() const noexcept { return transitions.n_actions(); }
  int n_constraints() const noexcept {
    return static_cast<int>(thresholds.size());
  }
};

// pi(a|s), rows = states.
struct StationaryPolicy {
  Matrix probs;

  int n_states() const noexcept { return static_cast<int>(probs.rows()); }
  int n_actions() const noexcept { return static_cast<int>(probs.cols()); }

  static StationaryPolicy uniform(int n_states, int n_actions) {
    return {Matrix::Constant(n_states, n_actions, 1.0 / n_actions)};
  }

  static StationaryPolicy deterministic(std::span<const int> actions,
                                        int n_actions) {
    StationaryPolicy pi{Matrix::Zero(static_cast<Eigen::Index>(actions.size()),
                                     n_actions)};
    for (std::size_t s = 0; s < actions.size(); ++s) {
      pi.probs(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
    }
    return pi;
  }
};

// Long-run fraction of time spent in each (s, a).
struct OccupancyMeasure {
  Matrix mu;
};

struct Violation {
  std::string kind;
  std::vector<int> location;
  double magnitude = 0.0;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
};

inline constexpr double kRowSumTolerance = 1e-9;

// Total mass below which an occupancy row is treated as unvisited.
inline constexpr double kOccupancyZeroTolerance = 1e-12;

inline ValidationReport validate_cmdp(const Cmdp& model) {
  ValidationReport report;
  auto add = [&](std::string kind, std::vector<int> where, double magnitude) {
    report.violations.push_back({std::move(kind), std::move(where), magnitude});
  };

  const int S = model.n_states();
  const int A = model.n_actions();
  if (S <= 0 || A <= 0) {
    add("shape", {S, A}, 0.0);
    return report;
  }

  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      double sum = 0.0;
      bool finite = true;
      for (int next = 0; next < S; ++next) {
        const double p = model.transitions(s, a, next);
        if (!std::isfinite(p)) {
          add("non-finite", {s, a, next}, 0.0);
          finite = false;
          continue;
        }
        if (p < 0.0) add("negative-probability", {s, a, next}, -p);
        sum += p;
      }
      if (finite && std::abs(sum - 1.0) > kRowSumTolerance) {
        add("row-sum", {s, a}, std::abs(sum - 1.0));
      }
    }
  }

  if (model.costs.empty()) add("shape", {0}, 0.0);
  if (!model.costs.empty() &&
      model.costs.size() != model.thresholds.size() + 1) {
    add("shape",
        {static_cast<int>(model.costs.size()),
         static_cast<int>(model.thresholds.size())},
        0.0);
  }
  for (std::size_t i = 0; i < model.costs.size(); ++i) {
    const CostMatrix& c = model.costs[i];
    if (c.rows() != S || c.cols() != A) {
      add("shape", {static_cast<int>(i)}, 0.0);
      continue;
    }
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double v = c(s, a);
        const int ii = static_cast<int>(i);
        if (!std::isfinite(v)) {
          add("non-finite", {ii, s, a}, 0.0);
        } else if (v < 0.0) {
          add("cost-range", {ii, s, a}, -v);
        } else if (v > 1.0) {
          add("cost-range", {ii, s, a}, v - 1.0);
        }
      }
    }
  }

  for (std::size_t i = 0; i < model.thresholds.size(); ++i) {
    const double tau = model.thresholds[i];
    const int ii = static_cast<int>(i);
    if (!std::isfinite(tau)) {
      add("non-finite", {ii}, 0.0);
    } else if (tau < 0.0) {
      add("threshold-range", {ii}, -tau);
    } else if (tau > 1.0) {
      add("threshold-range", {ii}, tau - 1.0);
    }
  }
  return report;
}

inline std::string describe(const ValidationReport& report) {
  std::string out;
  for (const Violation& v : report.violations) {
    out += v.kind + " at (";
    for (std::size_t i = 0; i < v.location.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(v.location[i]);
    }
    out += ") magnitude " + std::to_string(v.magnitude) + "\n";
  }
  return out;
}

// pi(a|s) = mu(s,a) / sum_a' mu(s,a'); unvisited rows become uniform.
inline StationaryPolicy policy_from_occupancy(const OccupancyMeasure& occ) {
  const Matrix& mu = occ.mu;
  const auto A = mu.cols();
  StationaryPolicy pi{Matrix(mu.rows(), A)};
  for (Eigen::Index s = 0; s < mu.rows(); ++s) {
    double total = 0.0;
    for (Eigen::Index a = 0; a < A; ++a) total += std::max(0.0, mu(s, a));
    if (total > kOccupancyZeroTolerance) {
      for (Eigen::Index a = 0; a < A; ++a) {
        pi.probs(s, a) = std::max(0.0, mu(s, a)) / total;
      }
    } else {
      pi.probs.row(s).setConstant(1.0 / static_cast<double>(A));
    }
  }
  return pi;
}

// P_pi[s, s'] = sum_a pi(a|s) p(s'|s,a).
inline Matrix induced_chain(const Transitions& p, const StationaryPolicy& pi) {
  if (pi.n_states() != p.n_states() || pi.n_actions() != p.n_actions()) {
    throw DimensionError("induced_chain: policy is " +
                         std::to_string(pi.n_states()) + "x" +
                         std::to_string(pi.n_actions()) + " but model is " +
                         std::to_string(p.n_states()) + "x" +
                         std::to_string(p.n_actions()));
  }
  const int S = p.n_states();
  Matrix chain = Matrix::Zero(S, S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < p.n_actions(); ++a) {
      const double w = pi.probs(s, a);
      if (w == 0.0) continue;
      const auto row = p.row(s, a);
      for (int next = 0; next < S; ++next) chain(s, next) += w * row[next];
    }
  }
  return chain;
}

inline Matrix induced_chain(const Cmdp& model, const StationaryPolicy& pi) {
  return induced_chain(model.transitions, pi);
}

// Expected one-step cost under pi: c_pi(s) = sum_a pi(a|s) c(s,a).
inline Vector policy_cost(const CostMatrix& cost, const StationaryPolicy& pi) {
  return cost.cwiseProduct(pi.probs).rowwise().sum();
}

}  // namespace psconrl
