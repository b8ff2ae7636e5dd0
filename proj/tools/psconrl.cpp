// Command-line front end: offline solves and diagnostics plus experiment runs.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "psconrl/psconrl.hpp"

namespace fs = std::filesystem;
using namespace psconrl;

namespace {

struct ModelOverrides {
  double theta = 0.9;
  double tau = 0.5275;
  std::optional<double> slip;
  std::vector<double> thresholds;
};

void add_overrides(CLI::App* cmd, ModelOverrides& o) {
  cmd->add_option("--theta", o.theta, "success probability of a1 in example1")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--tau", o.tau, "auxiliary threshold of example1")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--slip", o.slip, "grid slip probability");
  cmd->add_option("--threshold", o.thresholds, "grid auxiliary threshold");
}

// `name` is example1, a bundled grid name, or a grid path; a bare file name
// that does not exist locally is looked up in the bundled data directory.
EnvInstance resolve_env(const std::string& name, const ModelOverrides& o) {
  ExperimentConfig c;
  c.env = name;
  if (name != "example1" && !fs::exists(name) &&
      fs::exists(fs::path(data_dir()) / name)) {
    c.env = (fs::path(data_dir()) / name).string();
  }
  c.theta = o.theta;
  c.tau = o.tau;
  c.slip = o.slip;
  c.thresholds = o.thresholds;
  return make_env(c);
}

std::string action_name(const EnvInstance& env, int a) {
  if (env.model.n_actions() == 4 && env.name != "example1") {
    return kGridActionNames[static_cast<std::size_t>(a)];
  }
  return "a" + std::to_string(a);
}

int cmd_solve(const std::string& target, const ModelOverrides& o) {
  const EnvInstance env = resolve_env(target, o);
  const CmdpSolution sol = reference_solution(env);
  std::printf("model %s: %d states, %d actions, %d constraints\n",
              env.name.c_str(), env.model.n_states(), env.model.n_actions(),
              env.model.n_constraints());
  std::printf("optimal loss %s\n", format_number(sol.objective_value).c_str());
  for (int i = 0; i < env.model.n_constraints(); ++i) {
    const double value = sol.constraint_values[static_cast<std::size_t>(i)];
    const double tau = env.model.thresholds[static_cast<std::size_t>(i)];
    std::printf("constraint c%d: %s <= %s%s\n", i + 1, format_number(value).c_str(),
                format_number(tau).c_str(),
                std::abs(value - tau) <= 1e-7 ? " (binding)" : "");
  }
  std::printf("policy:\n");
  for (int s = 0; s < env.model.n_states(); ++s) {
    const double mass = sol.occupancy.mu.row(s).sum();
    std::printf("  %s", env.labels[static_cast<std::size_t>(s)].name.c_str());
    for (int a = 0; a < env.model.n_actions(); ++a) {
      const double p = sol.policy.probs(s, a);
      if (p > 0.0) {
        std::printf(" %s=%s", action_name(env, a).c_str(), format_number(p).c_str());
      }
    }
    std::printf("%s\n", mass > kOccupancyZeroTolerance ? "" : " (unvisited)");
  }
  return 0;
}

int cmd_diameter(const std::string& target, const ModelOverrides& o) {
  const EnvInstance env = resolve_env(target, o);
  std::printf("%s\n", format_number(env.diameter).c_str());
  return 0;
}

int cmd_validate(const std::string& target, const ModelOverrides& o) {
  const EnvInstance env = resolve_env(target, o);
  std::printf("%s: ok, %d states, %d actions, %d constraints, diameter %s\n",
              env.name.c_str(), env.model.n_states(), env.model.n_actions(),
              env.model.n_constraints(), format_number(env.diameter).c_str());
  return 0;
}

void print_summary(const std::string& agent, const ExperimentResult& r) {
  double regret = 0.0, clipped = 0.0;
  std::vector<double> aux(r.env.model.thresholds.size(), 0.0);
  for (const MetricsSeries& m : r.metrics) {
    regret += m.unclipped_regret.back();
    clipped += m.clipped_regret.back();
    for (std::size_t i = 0; i < aux.size(); ++i) aux[i] += m.average_cost[i + 1].back();
  }
  const double n = static_cast<double>(r.metrics.size());
  std::printf("%-9s runs %zu  optimal loss %s  mean regret %s (clipped %s)",
              agent.c_str(), r.metrics.size(),
              format_number(r.reference.objective_value).c_str(),
              format_number(regret / n).c_str(), format_number(clipped / n).c_str());
  for (std::size_t i = 0; i < aux.size(); ++i) {
    std::printf("  avg c%zu %s", i + 1, format_number(aux[i] / n).c_str());
  }
  std::printf("\n");
}

int cmd_run(const std::string& path, const std::string& output_dir) {
  ExperimentConfig c = load_config(path);
  if (!output_dir.empty()) c.output_dir = fs::absolute(output_dir).string();
  const ExperimentResult r = run(c);
  print_summary(to_string(c.agent), r);
  return 0;
}

int cmd_sweep(const std::string& path, const std::vector<AgentKind>& kinds,
              const std::string& output_dir) {
  ExperimentConfig base = load_config(path);
  if (!output_dir.empty()) base.output_dir = fs::absolute(output_dir).string();
  const EnvInstance env = make_env(base);
  for (AgentKind kind : kinds) {
    ExperimentConfig c = base;
    c.agent = kind;
    if (!base.output_dir.empty()) {
      fs::path dir = base.output_dir;
      if (dir.is_relative() && !base.base_dir.empty()) dir = base.base_dir / dir;
      c.output_dir = (dir / to_string(kind)).string();
    }
    print_summary(to_string(kind), run(c, env));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Posterior sampling for constrained average-cost MDPs"};
  app.require_subcommand(1);

  ModelOverrides overrides;
  std::string target;
  std::string config_path;
  std::string output_dir;
  std::vector<std::string> agents;

  CLI::App* solve = app.add_subcommand("solve", "optimal loss, policy and binding constraints");
  solve->add_option("model", target, "example1, a bundled grid name, or a grid file")->required();
  add_overrides(solve, overrides);

  CLI::App* diam = app.add_subcommand("diameter", "diameter of the transition kernel");
  diam->add_option("model", target, "example1, a bundled grid name, or a grid file")->required();
  add_overrides(diam, overrides);

  CLI::App* validate_cmd = app.add_subcommand("validate", "parse, compile and check a grid");
  validate_cmd->add_option("grid", target, "grid file or bundled grid name")->required();
  add_overrides(validate_cmd, overrides);

  CLI::App* run_cmd = app.add_subcommand("run", "run the experiment described by a config");
  run_cmd->add_option("config", config_path, "config file")->required();
  run_cmd->add_option("--output-dir", output_dir, "override output_dir");

  CLI::App* sweep = app.add_subcommand("sweep", "run several agents on shared seeds");
  sweep->add_option("config", config_path, "config file")->required();
  sweep->add_option("--agents", agents, "comma-separated agent list")
      ->required()
      ->delimiter(',')
      ->check(CLI::IsMember({"psconrl", "psrlcmdp", "cucrl"}));
  sweep->add_option("--output-dir", output_dir, "override output_dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*solve) return cmd_solve(target, overrides);
    if (*diam) return cmd_diameter(target, overrides);
    if (*validate_cmd) return cmd_validate(target, overrides);
    if (*run_cmd) return cmd_run(config_path, output_dir);
    if (*sweep) {
      std::vector<AgentKind> kinds;
      for (const std::string& a : agents) kinds.push_back(parse_agent_kind(a));
      return cmd_sweep(config_path, kinds, output_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
