#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "psconrl/cmdp.hpp"
#include "psconrl/error.hpp"
#include "psconrl/random.hpp"

namespace psconrl {

// Independent Dirichlet belief over every transition row p(.|s,a).
// alpha(s,a,s') = alpha0 + N(s,a,s') where N counts observed transitions.
class DirichletPosterior {
 public:
  DirichletPosterior(int n_states, int n_actions, double alpha0)
      : alpha0_(alpha0), alpha_(n_states, n_actions, alpha0) {
    if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) {
      throw InputError("DirichletPosterior: alpha0 must be positive");
    }
    if (n_states <= 0 || n_actions <= 0) {
      throw InputError("DirichletPosterior: empty state or action space");
    }
  }

  int n_states() const noexcept { return alpha_.n_states(); }
  int n_actions() const noexcept { return alpha_.n_actions(); }
  double prior_alpha() const noexcept { return alpha0_; }

  double alpha(int s, int a, int next) const { return alpha_(s, a, next); }
  const Transitions& alpha() const noexcept { return alpha_; }

  // Conjugate Bayes update for one observed transition.
  void observe(int s, int a, int next) {
    check(s, a);
    if (next < 0 || next >= n_states()) {
      throw InputError("DirichletPosterior::observe: next state " +
                       std::to_string(next) + " out of range");
    }
    alpha_(s, a, next) += 1.0;
  }

  // N(s,a) recovered from the concentration parameters.
  std::int64_t visits(int s, int a) const {
    check(s, a);
    double total = 0.0;
    for (double x : alpha_.row(s, a)) total += x - alpha0_;
    return std::llround(total);
  }

  // One kernel drawn from the posterior, each row independently.
  Transitions sample(Rng& rng) const {
    Transitions out(n_states(), n_actions());
    for (int s = 0; s < n_states(); ++s) {
      for (int a = 0; a < n_actions(); ++a) {
        rng.dirichlet(alpha_.row(s, a), out.row(s, a));
      }
    }
    return out;
  }

  // Posterior mean; unvisited rows are uniform.
  Transitions mean() const {
    Transitions out(n_states(), n_actions());
    for (int s = 0; s < n_states(); ++s) {
      for (int a = 0; a < n_actions(); ++a) {
        const auto row = alpha_.row(s, a);
        double total = 0.0;
        for (double x : row) total += x;
        auto dst = out.row(s, a);
        for (int next = 0; next < n_states(); ++next) {
          dst[static_cast<std::size_t>(next)] = row[next] / total;
        }
      }
    }
    return out;
  }

 private:
  void check(int s, int a) const {
    if (s < 0 || s >= n_states() || a < 0 || a >= n_actions()) {
      throw InputError("DirichletPosterior: (s,a) = (" + std::to_string(s) +
                       "," + std::to_string(a) + ") out of range");
    }
  }

  double alpha0_;
  Transitions alpha_;
};

}  // namespace psconrl
