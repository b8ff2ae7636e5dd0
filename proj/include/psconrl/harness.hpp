#pragma once

// Experiment runner: seeded simulations, regret/violation series and CSV
// output.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "psconrl/agents.hpp"
#include "psconrl/cmdp_lp.hpp"
#include "psconrl/envs.hpp"
#include "psconrl/keyvalue.hpp"

#ifndef PSCONRL_DATA_DIR
#define PSCONRL_DATA_DIR "data"
#endif

namespace psconrl {

struct ExperimentConfig {
  std::string env = "example1";  // built-in name, or a .grid path
  AgentKind agent = AgentKind::Psconrl;
  std::int64_t horizon = 1000;
  int n_runs = 1;
  std::uint64_t base_seed = 0;
  AgentConfig agent_config;
  std::string output_dir;  // empty: nothing is written
  std::int64_t stride = 100;
  int threads = 0;  // 0: hardware concurrency

  // Environment parameters; unset values keep the environment defaults.
  double theta = 0.9;
  double tau = 0.5275;
  std::optional<double> slip;
  std::vector<double> thresholds;

  std::filesystem::path base_dir;  // relative paths resolve against this
};

inline std::string data_dir() { return PSCONRL_DATA_DIR; }

inline void validate(const ExperimentConfig& c) {
  if (c.horizon < 1) throw ConfigError("horizon must be >= 1");
  if (c.n_runs < 1) throw ConfigError("n_runs must be >= 1");
  if (c.stride < 1) throw ConfigError("stride must be >= 1");
  if (!(c.agent_config.alpha0 > 0.0)) throw ConfigError("alpha0 must be > 0");
  if (c.agent_config.epoch_h < 1) throw ConfigError("epoch_h must be >= 1");
}

inline ExperimentConfig parse_config(std::string_view text,
                                     std::filesystem::path base_dir = {}) {
  const KeyValues kv = parse_key_values(split_lines(text));
  static const std::vector<std::string> known = {
      "env",       "agent",   "horizon", "n_runs",      "base_seed",
      "output_dir", "stride", "threads", "alpha0",      "rvi_tol",
      "sampling",  "epoch_h", "delta",   "bonus_scale", "theta",
      "tau",       "slip"};
  for (const std::string& key : kv.keys()) {
    const bool ok = std::find(known.begin(), known.end(), key) != known.end() ||
                    key.rfind("threshold[", 0) == 0;
    if (!ok) throw ParseError("unknown config key '" + key + "'", kv.line_of(key), 1);
  }
  ExperimentConfig c;
  c.base_dir = std::move(base_dir);
  c.env = kv.get_string("env", c.env);
  c.agent = parse_agent_kind(kv.get_string("agent", "psconrl"));
  c.horizon = kv.get_int("horizon", c.horizon);
  c.n_runs = static_cast<int>(kv.get_int("n_runs", c.n_runs));
  c.base_seed = static_cast<std::uint64_t>(kv.get_int("base_seed", 0));
  c.output_dir = kv.get_string("output_dir", "");
  c.stride = kv.get_int("stride", c.stride);
  c.threads = static_cast<int>(kv.get_int("threads", 0));
  AgentConfig& a = c.agent_config;
  a.alpha0 = kv.get_double("alpha0", a.alpha0);
  a.rvi_tol = kv.get_double("rvi_tol", a.rvi_tol);
  const std::string sampling = kv.get_string("sampling", "episodic");
  if (sampling == "episodic") {
    a.sampling = SamplingMode::Episodic;
  } else if (sampling == "per_step") {
    a.sampling = SamplingMode::PerStep;
  } else {
    throw ConfigError("sampling must be 'episodic' or 'per_step'");
  }
  a.epoch_h = static_cast<int>(kv.get_int("epoch_h", a.epoch_h));
  a.delta = kv.get_double("delta", a.delta);
  a.bonus_scale = kv.get_double("bonus_scale", a.bonus_scale);
  c.theta = kv.get_double("theta", c.theta);
  c.tau = kv.get_double("tau", c.tau);
  if (kv.contains("slip")) c.slip = kv.get_double("slip", 0.0);
  c.thresholds = kv.get_indexed("threshold");
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

// Resolves a built-in environment name or a grid path, applying the
// slip/threshold overrides of the config.
inline EnvInstance make_env(const ExperimentConfig& c) {
  if (c.env == "example1") return toy_counterexample(c.theta, c.tau);
  std::filesystem::path path;
  if (c.env == "marsrover4" || c.env == "marsrover8" || c.env == "box") {
    path = std::filesystem::path(data_dir()) / (c.env + ".grid");
  } else {
    path = c.env;
    if (path.is_relative() && !c.base_dir.empty()) path = c.base_dir / path;
  }
  GridSpec spec = load_grid(path.string());
  if (c.slip) spec.slip = *c.slip;
  if (!c.thresholds.empty()) spec.thresholds = c.thresholds;
  return compile_grid(spec, path.stem().string());
}

// Column-oriented per-step log of one run.
struct Trace {
  int n_components = 1;  // m + 1
  std::vector<int> state;
  std::vector<int> action;
  std::vector<int> next_state;
  std::vector<double> costs;  // row-major, n_components per step
  std::vector<int> episode;
  std::vector<Branch> branch;
  std::vector<EpisodeRecord> episodes;

  std::size_t size() const noexcept { return state.size(); }
  double cost(std::size_t step, int component) const {
    return costs[step * static_cast<std::size_t>(n_components) +
                 static_cast<std::size_t>(component)];
  }
};

struct RunResult {
  std::uint64_t seed = 0;
  Trace trace;
  Transitions transition_estimate;
  VisitCounts counts;
};

// Cumulative series, entry t - 1 after round t.
struct MetricsSeries {
  double reference_gain = 0.0;  // J*(c0; p*)
  std::vector<double> thresholds;
  std::vector<double> clipped_regret;
  std::vector<double> unclipped_regret;
  std::vector<std::vector<double>> clipped_violation;    // per constraint
  std::vector<std::vector<double>> unclipped_violation;  // per constraint
  std::vector<std::vector<double>> average_cost;         // per component

  std::size_t size() const noexcept { return clipped_regret.size(); }
};

// Optimal solution of the true CMDP; the benchmark every regret is measured
// against.
inline CmdpSolution reference_solution(const EnvInstance& env) {
  auto sol = solve_constrained(env.model);
  if (!sol) {
    throw InfeasibleModel(env.name +
                          ": infeasible (no policy meets the thresholds)");
  }
  return *std::move(sol);
}

inline MetricsSeries compute_metrics(const Trace& trace, double reference_gain,
                                     const std::vector<double>& thresholds) {
  const int m = trace.n_components - 1;
  if (static_cast<int>(thresholds.size()) != m) {
    throw DimensionError("compute_metrics: threshold count mismatch");
  }
  const std::size_t T = trace.size();
  MetricsSeries out;
  out.reference_gain = reference_gain;
  out.thresholds = thresholds;
  out.clipped_regret.resize(T);
  out.unclipped_regret.resize(T);
  out.clipped_violation.assign(static_cast<std::size_t>(m), std::vector<double>(T));
  out.unclipped_violation.assign(static_cast<std::size_t>(m),
                                 std::vector<double>(T));
  out.average_cost.assign(static_cast<std::size_t>(m + 1), std::vector<double>(T));

  double clipped = 0.0;
  double unclipped = 0.0;
  std::vector<double> vclip(static_cast<std::size_t>(m), 0.0);
  std::vector<double> vraw(static_cast<std::size_t>(m), 0.0);
  std::vector<double> total(static_cast<std::size_t>(m + 1), 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const double x = trace.cost(t, 0) - reference_gain;
    clipped += std::max(0.0, x);
    unclipped += x;
    out.clipped_regret[t] = clipped;
    out.unclipped_regret[t] = unclipped;
    for (int i = 0; i < m; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double y = trace.cost(t, i + 1) - thresholds[ii];
      vclip[ii] += std::max(0.0, y);
      vraw[ii] += y;
      out.clipped_violation[ii][t] = vclip[ii];
      out.unclipped_violation[ii][t] = vraw[ii];
    }
    for (int i = 0; i <= m; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      total[ii] += trace.cost(t, i);
      out.average_cost[ii][t] = total[ii] / static_cast<double>(t + 1);
    }
  }
  return out;
}

// Shortest round-trip decimal form of a double.
inline std::string format_number(double x) {
  char buf[32];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string trace_header(int n_components) {
  std::string h = "t,state,action,next_state";
  for (int i = 0; i < n_components; ++i) h += ",c" + std::to_string(i);
  return h + ",episode,branch";
}

inline std::string metrics_header(int m) {
  std::string h = "t,clipped_regret_c0,unclipped_regret_c0";
  for (int i = 1; i <= m; ++i) h += ",clipped_viol_c" + std::to_string(i);
  for (int i = 1; i <= m; ++i) h += ",unclipped_viol_c" + std::to_string(i);
  for (int i = 0; i <= m; ++i) h += ",avg_c" + std::to_string(i);
  return h;
}

// Metric rows every `stride` rounds plus the final round.
inline std::vector<std::size_t> report_rows(std::size_t T, std::int64_t stride) {
  std::vector<std::size_t> rows;
  for (std::size_t t = static_cast<std::size_t>(stride); t <= T;
       t += static_cast<std::size_t>(stride)) {
    rows.push_back(t);
  }
  if (T > 0 && (rows.empty() || rows.back() != T)) rows.push_back(T);
  return rows;
}

inline std::vector<double> metrics_row(const MetricsSeries& ms, std::size_t t) {
  const std::size_t i = t - 1;
  std::vector<double> row{ms.clipped_regret[i], ms.unclipped_regret[i]};
  for (const auto& v : ms.clipped_violation) row.push_back(v[i]);
  for (const auto& v : ms.unclipped_violation) row.push_back(v[i]);
  for (const auto& v : ms.average_cost) row.push_back(v[i]);
  return row;
}

inline void write_metrics_csv(const std::filesystem::path& path,
                              const MetricsSeries& ms, std::int64_t stride) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << metrics_header(static_cast<int>(ms.thresholds.size())) << '\n';
  for (std::size_t t : report_rows(ms.size(), stride)) {
    out << t;
    for (double x : metrics_row(ms, t)) out << ',' << format_number(x);
    out << '\n';
  }
}

// Across-run mean of the metric rows.
inline void write_aggregate_csv(const std::filesystem::path& path,
                                const std::vector<MetricsSeries>& runs,
                                std::int64_t stride) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << metrics_header(static_cast<int>(runs.front().thresholds.size()))
      << '\n';
  for (std::size_t t : report_rows(runs.front().size(), stride)) {
    std::vector<double> mean = metrics_row(runs.front(), t);
    for (std::size_t r = 1; r < runs.size(); ++r) {
      const std::vector<double> row = metrics_row(runs[r], t);
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += row[j];
    }
    out << t;
    for (double x : mean) {
      out << ',' << format_number(x / static_cast<double>(runs.size()));
    }
    out << '\n';
  }
}

inline void write_episodes_csv(const std::filesystem::path& path,
                               const std::vector<EpisodeRecord>& episodes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << "episode,start,length,branch,lp_objective,target\n";
  for (const EpisodeRecord& e : episodes) {
    out << e.episode << ',' << e.start << ',' << e.length << ','
        << to_string(e.branch) << ','
        << (std::isnan(e.lp_objective) ? std::string()
                                       : format_number(e.lp_objective))
        << ',' << e.target << '\n';
  }
}

// Independent generator streams of one run.
inline Rng env_stream(std::uint64_t run_seed) {
  return Rng(derive_seed(run_seed, 0));
}
inline Rng agent_stream(std::uint64_t run_seed) {
  return Rng(derive_seed(run_seed, 1));
}

// One simulation of `horizon` rounds from the initial state. When
// `trace_csv` is given the trace is streamed to it, flushed every `stride`
// rounds.
inline RunResult simulate(const EnvInstance& env, AgentKind kind,
                          const AgentConfig& config, std::int64_t horizon,
                          std::uint64_t seed, std::ostream* trace_csv = nullptr,
                          std::int64_t stride = 100) {
  Rng env_rng = env_stream(seed);
  std::unique_ptr<Agent> agent =
      make_agent(kind, env.model, config, agent_stream(seed));
  RunResult result;
  result.seed = seed;
  Trace& trace = result.trace;
  const int comps = static_cast<int>(env.model.costs.size());
  trace.n_components = comps;
  const auto T = static_cast<std::size_t>(horizon);
  trace.state.reserve(T);
  trace.action.reserve(T);
  trace.next_state.reserve(T);
  trace.costs.reserve(T * static_cast<std::size_t>(comps));
  trace.episode.reserve(T);
  trace.branch.reserve(T);
  if (trace_csv) *trace_csv << trace_header(comps) << '\n';

  int s = env.initial_state;
  for (std::int64_t t = 1; t <= horizon; ++t) {
    int a = 0;
    try {
      a = agent->act(s, t);
    } catch (const Error& e) {
      throw Error("run seed " + std::to_string(seed) + ", round " +
                  std::to_string(t) + ": " + e.what());
    }
    const EnvStep step = env_step(env, s, a, env_rng);
    agent->observe(s, a, step.next_state, step.costs);
    trace.state.push_back(s);
    trace.action.push_back(a);
    trace.next_state.push_back(step.next_state);
    trace.costs.insert(trace.costs.end(), step.costs.begin(), step.costs.end());
    trace.episode.push_back(agent->episode_index());
    trace.branch.push_back(agent->branch());
    if (trace_csv) {
      std::ostream& out = *trace_csv;
      out << t << ',' << s << ',' << a << ',' << step.next_state;
      for (double c : step.costs) out << ',' << format_number(c);
      out << ',' << agent->episode_index() << ',' << to_string(agent->branch())
          << '\n';
      if (t % stride == 0) out.flush();
    }
    s = step.next_state;
  }
  agent->finish(horizon + 1);
  trace.episodes = agent->episodes();
  result.transition_estimate = agent->transition_estimate();
  result.counts = agent->counts();
  return result;
}

struct ExperimentResult {
  EnvInstance env;
  CmdpSolution reference;
  std::vector<RunResult> runs;
  std::vector<MetricsSeries> metrics;
};

// Runs `body(j)` for j in [0, n) on up to `threads` workers.
template <typename Body>
void parallel_for(int n, int threads, Body&& body) {
  const int workers = std::max(
      1, std::min(n, threads > 0 ? threads
                                 : static_cast<int>(
                                       std::thread::hardware_concurrency())));
  if (workers == 1) {
    for (int j = 0; j < n; ++j) body(j);
    return;
  }
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int j = next++; j < n; j = next++) {
        try {
          body(j);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// n_runs independent simulations with seeds base_seed + j. With an output
// directory, writes trace_run<j>.csv, episodes_run<j>.csv,
// metrics_run<j>.csv and metrics_aggregate.csv.
inline ExperimentResult run(const ExperimentConfig& config,
                            const EnvInstance& env) {
  validate(config);
  ExperimentResult out{env, reference_solution(env), {}, {}};
  const int n = config.n_runs;
  out.runs.resize(static_cast<std::size_t>(n));
  out.metrics.resize(static_cast<std::size_t>(n));

  std::filesystem::path dir;
  if (!config.output_dir.empty()) {
    dir = config.output_dir;
    if (dir.is_relative() && !config.base_dir.empty()) {
      dir = config.base_dir / dir;
    }
    std::filesystem::create_directories(dir);
  }
  auto run_file = [&](const char* stem, int j) {
    return dir / (std::string(stem) + "_run" + std::to_string(j) + ".csv");
  };

  parallel_for(n, config.threads, [&](int j) {
    const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(j);
    const auto jj = static_cast<std::size_t>(j);
    std::unique_ptr<std::ofstream> trace_file;
    if (!dir.empty()) {
      trace_file = std::make_unique<std::ofstream>(run_file("trace", j),
                                                   std::ios::binary);
      if (!*trace_file) throw ConfigError("cannot write trace file");
    }
    try {
      out.runs[jj] = simulate(env, config.agent, config.agent_config,
                              config.horizon, seed, trace_file.get(),
                              config.stride);
    } catch (const Error& e) {
      throw Error("run " + std::to_string(j) + ": " + e.what());
    }
    out.metrics[jj] = compute_metrics(out.runs[jj].trace,
                                      out.reference.objective_value,
                                      env.model.thresholds);
    if (!dir.empty()) {
      write_metrics_csv(run_file("metrics", j), out.metrics[jj], config.stride);
      write_episodes_csv(run_file("episodes", j), out.runs[jj].trace.episodes);
    }
  });
  if (!dir.empty()) {
    write_aggregate_csv(dir / "metrics_aggregate.csv", out.metrics,
                        config.stride);
  }
  return out;
}

inline ExperimentResult run(const ExperimentConfig& config) {
  return run(config, make_env(config));
}

}  // namespace psconrl
