#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "psconrl/harness.hpp"

namespace psconrl {
namespace {

namespace fs = std::filesystem;

Trace make_trace(const std::vector<std::vector<double>>& rows) {
  Trace tr;
  tr.n_components = static_cast<int>(rows.front().size());
  for (const auto& r : rows) {
    tr.state.push_back(0);
    tr.action.push_back(0);
    tr.next_state.push_back(0);
    tr.costs.insert(tr.costs.end(), r.begin(), r.end());
    tr.episode.push_back(1);
    tr.branch.push_back(Branch::LpFeasible);
  }
  return tr;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("psconrl_test_" + name);
  fs::remove_all(dir);
  return dir;
}

TEST(Metrics, ConstantOptimalCostHasZeroClippedRegret) {
  const Trace tr = make_trace(std::vector<std::vector<double>>(10, {0.25, 0.0}));
  const MetricsSeries ms = compute_metrics(tr, 0.25, {0.5});
  for (std::size_t t = 0; t < 10; ++t) {
    EXPECT_EQ(ms.clipped_regret[t], 0.0);
    EXPECT_EQ(ms.unclipped_regret[t], 0.0);
    EXPECT_EQ(ms.clipped_violation[0][t], 0.0);
    EXPECT_DOUBLE_EQ(ms.unclipped_violation[0][t], -0.5 * (t + 1));
    EXPECT_DOUBLE_EQ(ms.average_cost[0][t], 0.25);
  }
}

TEST(Metrics, AlternatingAuxiliaryCost) {
  std::vector<std::vector<double>> rows;
  for (int t = 0; t < 8; ++t) rows.push_back({t % 2 ? 1.0 : 0.0, t % 2 ? 0.0 : 1.0});
  const MetricsSeries ms = compute_metrics(make_trace(rows), 0.5, {0.5});
  // aux 1, 0, 1, 0, ...: clipped violation grows by 0.5 every two rounds.
  for (std::size_t t = 0; t < 8; ++t) {
    EXPECT_DOUBLE_EQ(ms.clipped_violation[0][t], 0.5 * ((t + 2) / 2));
    EXPECT_DOUBLE_EQ(ms.clipped_regret[t], 0.5 * ((t + 1) / 2));
  }
  EXPECT_DOUBLE_EQ(ms.unclipped_violation[0][7], 0.0);
  EXPECT_DOUBLE_EQ(ms.unclipped_regret[7], 0.0);
  EXPECT_DOUBLE_EQ(ms.average_cost[1][7], 0.5);
  EXPECT_THROW(compute_metrics(make_trace(rows), 0.5, {}), DimensionError);
}

TEST(Formatting, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(-2.5), "-2.5");
  for (double x : {1.0 / 3.0, 2.0 / 7.0, 1e-300, 123456.789, 0.1 + 0.2}) {
    EXPECT_EQ(std::strtod(format_number(x).c_str(), nullptr), x);
  }
}

TEST(Formatting, HeadersAndRows) {
  EXPECT_EQ(trace_header(2), "t,state,action,next_state,c0,c1,episode,branch");
  EXPECT_EQ(metrics_header(1),
            "t,clipped_regret_c0,unclipped_regret_c0,clipped_viol_c1,"
            "unclipped_viol_c1,avg_c0,avg_c1");
  EXPECT_EQ(report_rows(10, 4), (std::vector<std::size_t>{4, 8, 10}));
  EXPECT_EQ(report_rows(8, 4), (std::vector<std::size_t>{4, 8}));
  EXPECT_TRUE(report_rows(0, 4).empty());
}

TEST(Config, ParsesKnownKeys) {
  const ExperimentConfig c = parse_config(
      "# comment\nenv = marsrover4\nagent = cucrl\nhorizon = 500\n"
      "n_runs = 3\nbase_seed = 42\nstride = 50\nalpha0 = 1\n"
      "sampling = per_step\nepoch_h = 20\ndelta = 0.1\nbonus_scale = 0.5\n"
      "slip = 0.05\nthreshold[1] = 0.3\n");
  EXPECT_EQ(c.env, "marsrover4");
  EXPECT_EQ(c.agent, AgentKind::Cucrl);
  EXPECT_EQ(c.horizon, 500);
  EXPECT_EQ(c.n_runs, 3);
  EXPECT_EQ(c.base_seed, 42u);
  EXPECT_EQ(c.stride, 50);
  EXPECT_EQ(c.agent_config.alpha0, 1.0);
  EXPECT_EQ(c.agent_config.sampling, SamplingMode::PerStep);
  EXPECT_EQ(c.agent_config.epoch_h, 20);
  EXPECT_EQ(c.agent_config.delta, 0.1);
  EXPECT_EQ(c.agent_config.bonus_scale, 0.5);
  ASSERT_TRUE(c.slip.has_value());
  EXPECT_EQ(*c.slip, 0.05);
  EXPECT_EQ(c.thresholds, std::vector<double>{0.3});

  const EnvInstance env = make_env(c);
  EXPECT_EQ(env.model.n_states(), 16);
  EXPECT_EQ(env.model.thresholds, std::vector<double>{0.3});
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_config("colour = red\n"), ParseError);
  EXPECT_THROW(parse_config("agent = ucrl2\n"), ConfigError);
  EXPECT_THROW(parse_config("horizon = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("alpha0 = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("sampling = sometimes\n"), ConfigError);
  EXPECT_THROW(parse_config("horizon = many\n"), Error);
  EXPECT_THROW(load_config("/nonexistent/cfg"), ConfigError);
}

TEST(Config, InfeasibleReferenceIsReported) {
  ExperimentConfig c;
  c.tau = 0.3;
  try {
    reference_solution(make_env(c));
    FAIL() << "expected InfeasibleModel";
  } catch (const InfeasibleModel& e) {
    EXPECT_NE(std::string(e.what()).find("infeasible"), std::string::npos);
  }
}

TEST(Harness, AggregateIsMeanOfRuns) {
  ExperimentConfig c;
  c.horizon = 1000;
  c.n_runs = 3;
  c.stride = 100;
  c.base_seed = 5;
  c.output_dir = scratch_dir("aggregate").string();
  run(c);
  const auto agg = read_csv(fs::path(c.output_dir) / "metrics_aggregate.csv");
  std::vector<std::vector<std::vector<double>>> per_run;
  for (int j = 0; j < 3; ++j) {
    per_run.push_back(read_csv(fs::path(c.output_dir) /
                               ("metrics_run" + std::to_string(j) + ".csv")));
  }
  ASSERT_EQ(agg.size(), 10u);
  for (std::size_t r = 0; r < agg.size(); ++r) {
    for (std::size_t k = 1; k < agg[r].size(); ++k) {
      const double mean =
          (per_run[0][r][k] + per_run[1][r][k] + per_run[2][r][k]) / 3.0;
      EXPECT_NEAR(agg[r][k], mean, 1e-12);
    }
  }
  std::ifstream trace(fs::path(c.output_dir) / "trace_run0.csv");
  std::string line;
  int lines = 0;
  while (std::getline(trace, line)) ++lines;
  EXPECT_EQ(lines, 1001);
  fs::remove_all(c.output_dir);
}

TEST(Harness, OutputsAreByteIdenticalAcrossThreadCounts) {
  ExperimentConfig c;
  c.env = "marsrover4";
  c.horizon = 2000;
  c.n_runs = 2;
  c.output_dir = scratch_dir("serial").string();
  c.threads = 1;
  run(c);
  ExperimentConfig d = c;
  d.output_dir = scratch_dir("parallel").string();
  d.threads = 2;
  run(d);
  for (const char* f : {"trace_run0.csv", "trace_run1.csv", "metrics_run1.csv",
                        "episodes_run0.csv", "metrics_aggregate.csv"}) {
    const std::string a = slurp(fs::path(c.output_dir) / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(fs::path(d.output_dir) / f)) << f;
  }
  fs::remove_all(c.output_dir);
  fs::remove_all(d.output_dir);
}

TEST(Harness, SimulateMatchesInMemoryTrace) {
  const EnvInstance env = toy_counterexample(0.9, 0.5275);
  std::ostringstream csv;
  const RunResult r = simulate(env, AgentKind::Psconrl, {}, 300, 3, &csv, 50);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, trace_header(2));
  std::size_t t = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    ASSERT_EQ(cells.size(), 8u);
    EXPECT_EQ(std::stoi(cells[1]), r.trace.state[t]);
    EXPECT_EQ(std::stoi(cells[2]), r.trace.action[t]);
    EXPECT_EQ(std::stoi(cells[3]), r.trace.next_state[t]);
    ++t;
  }
  EXPECT_EQ(t, 300u);
  EXPECT_EQ(r.counts.sum(), 300);
}

TEST(Harness, ParallelForPropagatesErrors) {
  EXPECT_THROW(parallel_for(8, 4,
                            [](int j) {
                              if (j == 5) throw ConfigError("boom");
                            }),
               ConfigError);
  std::vector<int> hit(20, 0);
  parallel_for(20, 3, [&](int j) { hit[static_cast<std::size_t>(j)] = 1; });
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 20);
}

TEST(Metrics, ClippedSeriesAreMonotoneAndDominate) {
  const EnvInstance env = toy_counterexample(0.9, 0.5275);
  const RunResult r = simulate(env, AgentKind::Psconrl, {}, 5000, 12);
  const MetricsSeries ms = compute_metrics(
      r.trace, reference_solution(env).objective_value, env.model.thresholds);
  for (std::size_t t = 0; t < ms.size(); ++t) {
    EXPECT_GE(ms.clipped_regret[t], ms.unclipped_regret[t]);
    EXPECT_GE(ms.clipped_violation[0][t], ms.unclipped_violation[0][t]);
    if (t > 0) {
      EXPECT_GE(ms.clipped_regret[t], ms.clipped_regret[t - 1]);
      EXPECT_GE(ms.clipped_violation[0][t], ms.clipped_violation[0][t - 1]);
    }
  }
}

TEST(Reference, VacuousThresholdEqualsUnconstrainedOptimum) {
  const EnvInstance env = toy_counterexample(0.9, 1.0);
  EXPECT_NEAR(reference_solution(env).objective_value,
              solve_unconstrained(env.model, 0).objective_value, 1e-9);
}

TEST(Reference, UnconstrainedGridMatchesRvi) {
  const EnvInstance env =
      compile_grid(load_grid(data_dir() + "/marsrover4.grid"), "m4");
  Cmdp plain = env.model;
  plain.costs.resize(1);
  plain.thresholds.clear();
  const EnvInstance bare{"bare", plain, env.initial_state, env.labels, 0.0};
  const double rvi = relative_value_iteration(plain.transitions, plain.costs[0]).gain;
  EXPECT_NEAR(reference_solution(bare).objective_value, rvi, 1e-6);
}

// Rolling out the reference policy on the true model drives the running
// auxiliary average to the binding threshold.
TEST(Reference, OptimalRolloutMeetsThreshold) {
  const EnvInstance env = toy_counterexample(0.9, 0.5275);
  const CmdpSolution ref = reference_solution(env);
  EXPECT_NEAR(policy_gain(env.model.transitions, ref.policy, env.model.costs[1]).gain,
              0.5275, 1e-9);
  Rng env_rng(21);
  Rng policy_rng(22);
  int s = env.initial_state;
  double aux = 0.0;
  const int T = 100000;
  for (int t = 0; t < T; ++t) {
    const auto row = ref.policy.probs.row(s);
    const int a = policy_rng.categorical(std::span<const double>(row.data(), 2));
    const EnvStep step = env_step(env, s, a, env_rng);
    aux += step.costs[1];
    s = step.next_state;
  }
  EXPECT_NEAR(aux / T, 0.5275, 0.02);
}

TEST(Harness, SingleRoundRun) {
  ExperimentConfig c;
  c.horizon = 1;
  const ExperimentResult r = run(c);
  ASSERT_EQ(r.runs.size(), 1u);
  EXPECT_EQ(r.runs[0].trace.size(), 1u);
  EXPECT_EQ(r.runs[0].trace.episodes.size(), 1u);
  EXPECT_EQ(r.runs[0].trace.episodes[0].length, 1);
}

}  // namespace
}  // namespace psconrl
