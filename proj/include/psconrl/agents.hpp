#pragma once

// Learning agents sharing one act/observe protocol:
//   PsconrlAgent  - posterior sampling; LP policy when the sampled CMDP is
//                   feasible, shortest path to the least visited state
//                   otherwise.
//   PsrlCmdpAgent - posterior sampling; ignores the budgets whenever the
//                   sampled CMDP is infeasible.
//   CucrlAgent    - optimistic main cost / pessimistic auxiliary costs on
//                   empirical estimates, epochs of k * h rounds.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psconrl/cmdp.hpp"
#include "psconrl/cmdp_lp.hpp"
#include "psconrl/planning.hpp"
#include "psconrl/posterior.hpp"
#include "psconrl/random.hpp"

namespace psconrl {

enum class Branch { LpFeasible, ExplorationFallback, Unconstrained, Random };

inline const char* to_string(Branch b) {
  switch (b) {
    case Branch::LpFeasible: return "lp";
    case Branch::ExplorationFallback: return "explore";
    case Branch::Unconstrained: return "unconstrained";
    case Branch::Random: return "random";
  }
  return "?";
}

enum class AgentKind { Psconrl, PsrlCmdp, Cucrl };

inline const char* to_string(AgentKind k) {
  switch (k) {
    case AgentKind::Psconrl: return "psconrl";
    case AgentKind::PsrlCmdp: return "psrlcmdp";
    case AgentKind::Cucrl: return "cucrl";
  }
  return "?";
}

inline AgentKind parse_agent_kind(std::string_view s) {
  if (s == "psconrl") return AgentKind::Psconrl;
  if (s == "psrlcmdp") return AgentKind::PsrlCmdp;
  if (s == "cucrl") return AgentKind::Cucrl;
  throw ConfigError("unknown agent '" + std::string(s) + "'");
}

enum class SamplingMode { Episodic, PerStep };

using VisitCounts =
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct AgentConfig {
  double alpha0 = 0.1;
  double rvi_tol = 0.0;  // non-positive: 1e-9 * S
  SamplingMode sampling = SamplingMode::Episodic;
  // C-UCRL
  int epoch_h = 100;
  double bonus_scale = 1.0;
  double delta = 0.05;
};

// Bookkeeping of the current episode; rounds are numbered from 1.
struct EpisodeState {
  int episode = 0;               // k
  std::int64_t start = 1;        // t_k
  std::int64_t prev_length = 0;  // T_{k-1}
  VisitCounts start_counts;      // N_{t_k}(s,a)
  StationaryPolicy policy;
  Branch branch = Branch::LpFeasible;
};

// One record per episode (epoch for C-UCRL).
struct EpisodeRecord {
  int episode = 0;
  std::int64_t start = 0;
  std::int64_t length = 0;  // filled in when the episode ends
  Branch branch = Branch::LpFeasible;
  double lp_objective = std::numeric_limits<double>::quiet_NaN();
  int target = -1;  // exploration target, -1 if none
};

// True when the episode must end after round t - 1, i.e. `t` is the round
// about to be played and `counts` already include round t - 1:
//   (ii) the episode has outgrown the previous one, t - t_k > T_{k-1}, or
//   (i)  some N_t(s,a) >= max(1, 2 N_{t_k}(s,a)).
inline bool should_stop(const EpisodeState& es, const VisitCounts& counts,
                        std::int64_t t) {
  if (t - es.start > es.prev_length) return true;
  for (Eigen::Index s = 0; s < counts.rows(); ++s) {
    for (Eigen::Index a = 0; a < counts.cols(); ++a) {
      const std::int64_t doubled =
          std::max<std::int64_t>(1, 2 * es.start_counts(s, a));
      if (counts(s, a) >= doubled) return true;
    }
  }
  return false;
}

// argmin_s N(s) with N(s) = sum_a N(s,a); ties go to the lowest index.
inline int least_visited_state(const VisitCounts& counts) {
  int best = 0;
  std::int64_t best_count = std::numeric_limits<std::int64_t>::max();
  for (Eigen::Index s = 0; s < counts.rows(); ++s) {
    const std::int64_t n = counts.row(s).sum();
    if (n < best_count) {
      best_count = n;
      best = static_cast<int>(s);
    }
  }
  return best;
}

struct EpisodePlan {
  StationaryPolicy policy;
  Branch branch = Branch::LpFeasible;
  double lp_objective = std::numeric_limits<double>::quiet_NaN();
  int target = -1;
};

namespace detail {

enum class InfeasibleFallback { Explore, IgnoreBudgets };

inline EpisodePlan posterior_plan(const DirichletPosterior& posterior,
                                  const std::vector<CostMatrix>& costs,
                                  const std::vector<double>& thresholds,
                                  const VisitCounts& counts, Rng& rng,
                                  const RviOptions& rvi,
                                  InfeasibleFallback fallback) {
  for (int attempt = 0;; ++attempt) {
    Cmdp sampled{posterior.sample(rng), costs, thresholds};
    EpisodePlan plan;
    if (auto sol = solve_constrained(sampled)) {
      plan.policy = std::move(sol->policy);
      plan.branch = Branch::LpFeasible;
      plan.lp_objective = sol->objective_value;
      return plan;
    }
    if (fallback == InfeasibleFallback::IgnoreBudgets) {
      CmdpSolution sol = solve_unconstrained(sampled, 0);
      plan.policy = std::move(sol.policy);
      plan.branch = Branch::Unconstrained;
      plan.lp_objective = sol.objective_value;
      return plan;
    }
    plan.target = least_visited_state(counts);
    plan.branch = Branch::ExplorationFallback;
    try {
      plan.policy =
          shortest_path_policy(sampled.transitions, plan.target, rvi);
      return plan;
    } catch (const NonConvergence& e) {
      if (attempt >= 1) {
        throw NonConvergence(
            std::string("exploration policy failed on two consecutive "
                        "posterior samples: ") + e.what());
      }
    }
  }
}

}  // namespace detail

// Plans one PSConRL episode: sample p_k, solve the CMDP LP under p_k, and
// fall back to the shortest path to the least visited state when the LP is
// infeasible.
inline EpisodePlan psconrl_begin_episode(const DirichletPosterior& posterior,
                                         const std::vector<CostMatrix>& costs,
                                         const std::vector<double>& thresholds,
                                         const VisitCounts& counts, Rng& rng,
                                         const RviOptions& rvi = {}) {
  return detail::posterior_plan(posterior, costs, thresholds, counts, rng, rvi,
                                detail::InfeasibleFallback::Explore);
}

// Same sampling and LP as PSConRL, but an infeasible sample is answered with
// the unconstrained optimum of the main cost.
inline EpisodePlan psrlcmdp_begin_episode(const DirichletPosterior& posterior,
                                          const std::vector<CostMatrix>& costs,
                                          const std::vector<double>& thresholds,
                                          const VisitCounts& counts, Rng& rng) {
  return detail::posterior_plan(posterior, costs, thresholds, counts, rng, {},
                                detail::InfeasibleFallback::IgnoreBudgets);
}

// Running empirical means of the observed costs.
struct CostEstimates {
  std::vector<CostMatrix> sums;  // per component
  VisitCounts counts;

  CostEstimates(int n_components, int n_states, int n_actions)
      : sums(static_cast<std::size_t>(n_components),
             CostMatrix::Zero(n_states, n_actions)),
        counts(VisitCounts::Zero(n_states, n_actions)) {}

  void observe(int s, int a, std::span<const double> costs) {
    for (std::size_t i = 0; i < sums.size(); ++i) sums[i](s, a) += costs[i];
    ++counts(s, a);
  }

  // sum / (N v 1)
  CostMatrix mean(int component) const {
    CostMatrix out = sums[static_cast<std::size_t>(component)];
    for (Eigen::Index s = 0; s < out.rows(); ++s) {
      for (Eigen::Index a = 0; a < out.cols(); ++a) {
        out(s, a) /= static_cast<double>(std::max<std::int64_t>(1, counts(s, a)));
      }
    }
    return out;
  }
};

struct EpochPlan {
  int epoch = 1;
  std::int64_t length = 0;        // k * h
  std::int64_t random_steps = 0;  // rounds played uniformly at random first
  std::optional<StationaryPolicy> policy;
  double lp_objective = std::numeric_limits<double>::quiet_NaN();
};

inline double cucrl_bonus(std::int64_t visits, int n_states, int n_actions,
                          int epoch, const AgentConfig& config) {
  const double n = static_cast<double>(std::max<std::int64_t>(1, visits));
  const double log_term = std::log(2.0 * n_states * n_actions * epoch /
                                   config.delta);
  return std::min(1.0, config.bonus_scale * std::sqrt(log_term / n));
}

// Epoch k of C-UCRL: h random rounds followed by (k - 1) h rounds of the LP
// policy for the empirical model with c0 - b and ci + b. An infeasible LP
// turns the whole epoch random.
inline EpochPlan cucrl_begin_epoch(const Transitions& empirical_p,
                                   const CostEstimates& estimates,
                                   const std::vector<double>& thresholds,
                                   int epoch, const AgentConfig& config) {
  if (epoch < 1) throw InputError("cucrl_begin_epoch: epoch must be >= 1");
  if (config.epoch_h < 1) throw InputError("cucrl_begin_epoch: h must be >= 1");
  EpochPlan plan;
  plan.epoch = epoch;
  plan.length = static_cast<std::int64_t>(epoch) * config.epoch_h;
  plan.random_steps = plan.length;
  if (epoch == 1) return plan;

  const int S = empirical_p.n_states();
  const int A = empirical_p.n_actions();
  std::vector<CostMatrix> costs;
  for (int i = 0; i <= static_cast<int>(thresholds.size()); ++i) {
    CostMatrix c = estimates.mean(i);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const double b = cucrl_bonus(estimates.counts(s, a), S, A, epoch, config);
        c(s, a) = i == 0 ? std::max(0.0, c(s, a) - b)
                         : std::min(1.0, c(s, a) + b);
      }
    }
    costs.push_back(std::move(c));
  }
  if (auto sol = solve_constrained(Cmdp{empirical_p, std::move(costs), thresholds})) {
    plan.policy = std::move(sol->policy);
    plan.lp_objective = sol->objective_value;
    plan.random_steps = config.epoch_h;
  }
  return plan;
}

class Agent {
 public:
  virtual ~Agent() = default;

  virtual std::string_view name() const = 0;

  // Action for round t (t = 1, 2, ...) in state s. Starts a new episode
  // first when the previous one has ended.
  virtual int act(int s, std::int64_t t) = 0;

  // Feedback for the round just played.
  virtual void observe(int s, int a, int next, std::span<const double> costs) = 0;

  virtual int episode_index() const = 0;
  virtual Branch branch() const = 0;

  // Posterior (or empirical) mean of the kernel, for diagnostics.
  virtual Transitions transition_estimate() const = 0;

  const VisitCounts& counts() const noexcept { return counts_; }
  const std::vector<EpisodeRecord>& episodes() const noexcept {
    return episodes_;
  }

  // Closes the length of the running episode record; call at the end of a
  // run.
  void finish(std::int64_t next_round) {
    if (!episodes_.empty()) {
      episodes_.back().length = next_round - episodes_.back().start;
    }
  }

 protected:
  Agent(int n_states, int n_actions, Rng rng)
      : rng_(std::move(rng)), counts_(VisitCounts::Zero(n_states, n_actions)) {}

  int sample_action(const StationaryPolicy& pi, int s) {
    const auto row = pi.probs.row(s);
    return rng_.categorical(std::span<const double>(row.data(), row.size()));
  }

  void open_record(EpisodeRecord record) {
    finish(record.start);
    episodes_.push_back(record);
  }

  Rng rng_;
  VisitCounts counts_;
  std::vector<EpisodeRecord> episodes_;
};

// Common machinery of the two posterior-sampling agents.
class PosteriorSamplingAgent : public Agent {
 public:
  int act(int s, std::int64_t t) override {
    if (need_plan_) begin_episode(t);
    last_round_ = t;
    return sample_action(es_.policy, s);
  }

  void observe(int s, int a, int next, std::span<const double>) override {
    ++counts_(s, a);
    posterior_.observe(s, a, next);
    need_plan_ = config_.sampling == SamplingMode::PerStep ||
                 should_stop(es_, counts_, last_round_ + 1);
  }

  int episode_index() const override { return es_.episode; }
  Branch branch() const override { return es_.branch; }
  Transitions transition_estimate() const override { return posterior_.mean(); }

  const EpisodeState& episode_state() const noexcept { return es_; }
  const DirichletPosterior& posterior() const noexcept { return posterior_; }

 protected:
  PosteriorSamplingAgent(const Cmdp& known_costs_model, const AgentConfig& config,
                         Rng rng)
      : Agent(known_costs_model.n_states(), known_costs_model.n_actions(),
              std::move(rng)),
        config_(config),
        costs_(known_costs_model.costs),
        thresholds_(known_costs_model.thresholds),
        posterior_(known_costs_model.n_states(), known_costs_model.n_actions(),
                   config.alpha0) {
    rvi_.tolerance = config.rvi_tol;
  }

  virtual EpisodePlan plan() = 0;

  AgentConfig config_;
  std::vector<CostMatrix> costs_;
  std::vector<double> thresholds_;
  DirichletPosterior posterior_;
  RviOptions rvi_;

 private:
  void begin_episode(std::int64_t t) {
    es_.prev_length = es_.episode == 0 ? 0 : t - es_.start;
    es_.start = t;
    ++es_.episode;
    es_.start_counts = counts_;
    EpisodePlan p = plan();
    es_.policy = std::move(p.policy);
    es_.branch = p.branch;
    open_record({es_.episode, t, 0, p.branch, p.lp_objective, p.target});
    need_plan_ = false;
  }

  EpisodeState es_;
  bool need_plan_ = true;
  std::int64_t last_round_ = 0;
};

class PsconrlAgent final : public PosteriorSamplingAgent {
 public:
  // Only the costs and thresholds of `model` are read; the kernel is learned.
  PsconrlAgent(const Cmdp& model, const AgentConfig& config, Rng rng)
      : PosteriorSamplingAgent(model, config, std::move(rng)) {}

  std::string_view name() const override { return "psconrl"; }

 protected:
  EpisodePlan plan() override {
    return psconrl_begin_episode(posterior_, costs_, thresholds_, counts_, rng_,
                                 rvi_);
  }
};

class PsrlCmdpAgent final : public PosteriorSamplingAgent {
 public:
  PsrlCmdpAgent(const Cmdp& model, const AgentConfig& config, Rng rng)
      : PosteriorSamplingAgent(model, config, std::move(rng)) {}

  std::string_view name() const override { return "psrlcmdp"; }

 protected:
  EpisodePlan plan() override {
    return psrlcmdp_begin_episode(posterior_, costs_, thresholds_, counts_,
                                  rng_);
  }
};

// C-UCRL learns both the kernel and the costs from data; only the state and
// action counts and the thresholds are given.
class CucrlAgent final : public Agent {
 public:
  CucrlAgent(int n_states, int n_actions, std::vector<double> thresholds,
             const AgentConfig& config, Rng rng)
      : Agent(n_states, n_actions, std::move(rng)),
        config_(config),
        thresholds_(std::move(thresholds)),
        transitions_(n_states, n_actions, config.alpha0),
        estimates_(static_cast<int>(thresholds_.size()) + 1, n_states,
                   n_actions) {
    if (config.epoch_h < 1) throw InputError("CucrlAgent: h must be >= 1");
  }

  std::string_view name() const override { return "cucrl"; }

  int act(int s, std::int64_t t) override {
    if (!plan_ || step_in_epoch_ >= plan_->length) begin_epoch(t);
    const bool random = step_in_epoch_ < plan_->random_steps;
    branch_ = random ? Branch::Random : Branch::LpFeasible;
    ++step_in_epoch_;
    if (random) return rng_.uniform_int(static_cast<int>(counts_.cols()));
    return sample_action(*plan_->policy, s);
  }

  void observe(int s, int a, int next, std::span<const double> costs) override {
    ++counts_(s, a);
    transitions_.observe(s, a, next);
    estimates_.observe(s, a, costs);
  }

  int episode_index() const override { return plan_ ? plan_->epoch : 0; }
  Branch branch() const override { return branch_; }
  Transitions transition_estimate() const override {
    return transitions_.mean();
  }

  const CostEstimates& cost_estimates() const noexcept { return estimates_; }
  const std::optional<EpochPlan>& epoch_plan() const noexcept { return plan_; }

 private:
  void begin_epoch(std::int64_t t) {
    const int k = plan_ ? plan_->epoch + 1 : 1;
    plan_ = cucrl_begin_epoch(transitions_.mean(), estimates_, thresholds_, k,
                              config_);
    step_in_epoch_ = 0;
    open_record({k, t, 0,
                 plan_->policy ? Branch::LpFeasible : Branch::Random,
                 plan_->lp_objective, -1});
  }

  AgentConfig config_;
  std::vector<double> thresholds_;
  DirichletPosterior transitions_;
  CostEstimates estimates_;
  std::optional<EpochPlan> plan_;
  std::int64_t step_in_epoch_ = 0;
  Branch branch_ = Branch::Random;
};

inline std::unique_ptr<Agent> make_agent(AgentKind kind, const Cmdp& model,
                                         const AgentConfig& config, Rng rng) {
  switch (kind) {
    case AgentKind::Psconrl:
      return std::make_unique<PsconrlAgent>(model, config, std::move(rng));
    case AgentKind::PsrlCmdp:
      return std::make_unique<PsrlCmdpAgent>(model, config, std::move(rng));
    case AgentKind::Cucrl:
      return std::make_unique<CucrlAgent>(model.n_states(), model.n_actions(),
                                          model.thresholds, config,
                                          std::move(rng));
  }
  throw InputError("make_agent: unknown kind");
}

}  // namespace psconrl
