#pragma once

// Benchmark CMDPs: the two-state counterexample and gridworlds compiled to
// explicit tensors.

#include <algorithm>
#include <array>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "psconrl/cmdp.hpp"
#include "psconrl/keyvalue.hpp"
#include "psconrl/planning.hpp"
#include "psconrl/random.hpp"

namespace psconrl {

enum class GridKind { Marsrover, Box };

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
  auto operator<=>(const Cell&) const = default;
};

struct GridSpec {
  GridKind kind = GridKind::Marsrover;
  std::vector<std::string> cells;  // rows of legend characters
  double slip = 0.1;
  std::vector<double> thresholds;

  int rows() const noexcept { return static_cast<int>(cells.size()); }
  int cols() const noexcept {
    return cells.empty() ? 0 : static_cast<int>(cells.front().size());
  }
  char at(Cell c) const {
    return cells[static_cast<std::size_t>(c.row)]
                [static_cast<std::size_t>(c.col)];
  }
  bool is_wall(Cell c) const { return at(c) == '#'; }

  Cell find(char symbol) const {
    for (int r = 0; r < rows(); ++r) {
      for (int c = 0; c < cols(); ++c) {
        if (at({r, c}) == symbol) return {r, c};
      }
    }
    throw InputError(std::string("grid has no '") + symbol + "'");
  }
};

// Where a state index lives in the world; box fields are -1 outside Box.
struct StateLabel {
  Cell agent{-1, -1};
  Cell box{-1, -1};
  std::string name;
};

struct EnvInstance {
  std::string name;
  Cmdp model;
  int initial_state = 0;
  std::vector<StateLabel> labels;
  double diameter = 0.0;
};

inline constexpr std::array<const char*, 4> kGridActionNames = {"up", "down",
                                                                 "right", "left"};

namespace detail {

inline constexpr std::array<Cell, 4> kMoves = {
    Cell{-1, 0}, Cell{1, 0}, Cell{0, 1}, Cell{0, -1}};

// Perpendicular directions of up/down/right/left.
inline constexpr std::array<std::array<int, 2>, 4> kSideways = {
    std::array<int, 2>{2, 3}, std::array<int, 2>{2, 3},
    std::array<int, 2>{0, 1}, std::array<int, 2>{0, 1}};

inline Cell step(Cell c, int dir) {
  return {c.row + kMoves[static_cast<std::size_t>(dir)].row,
          c.col + kMoves[static_cast<std::size_t>(dir)].col};
}

// (direction, probability) outcomes of choosing `action` under slip `eps`.
inline std::vector<std::pair<int, double>> slip_outcomes(int action,
                                                         double eps) {
  std::vector<std::pair<int, double>> out{{action, 1.0 - eps}};
  if (eps > 0.0) {
    for (int side : kSideways[static_cast<std::size_t>(action)]) {
      out.emplace_back(side, eps / 2.0);
    }
  }
  return out;
}

inline std::string cell_name(Cell c) {
  return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

inline void finish_instance(EnvInstance& env) {
  const ValidationReport report = validate_cmdp(env.model);
  if (!report.ok()) {
    throw InputError(env.name + ": compiled model is invalid\n" +
                     describe(report));
  }
  if (!is_communicating(env.model.transitions)) {
    throw InputError(env.name + ": model is not communicating");
  }
  env.diameter = diameter(env.model.transitions);
}

}  // namespace detail

// Two states s0, s1 and two actions a0, a1. a1 in s0 reaches s1 with
// probability theta, a0 keeps the agent in s0, and s1 returns to s0 under
// either action. Main cost is 1 in s1 (the reward is earned in s0); the
// auxiliary cost is 1 in s0.
inline EnvInstance toy_counterexample(double theta, double tau) {
  if (!(theta > 0.0 && theta <= 1.0)) {
    throw InputError("toy_counterexample: theta must lie in (0, 1]");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw InputError("toy_counterexample: tau must lie in [0, 1]");
  }
  EnvInstance env;
  env.name = "example1";
  Transitions p(2, 2);
  p(0, 0, 0) = 1.0;
  p(0, 1, 1) = theta;
  p(0, 1, 0) = 1.0 - theta;
  p(1, 0, 0) = 1.0;
  p(1, 1, 0) = 1.0;
  CostMatrix main(2, 2);
  main << 0.0, 0.0, 1.0, 1.0;
  CostMatrix aux(2, 2);
  aux << 1.0, 1.0, 0.0, 0.0;
  env.model = Cmdp{std::move(p), {main, aux}, {tau}};
  env.initial_state = 0;
  env.labels = {StateLabel{{0, 0}, {-1, -1}, "s0"},
                StateLabel{{0, 1}, {-1, -1}, "s1"}};
  detail::finish_instance(env);
  return env;
}

// Smallest budget for which the counterexample is feasible: the auxiliary
// gain of "always a1", 1 / (1 + theta).
inline double toy_min_feasible_budget(double theta) {
  return 1.0 / (1.0 + theta);
}

inline GridKind parse_grid_kind(const std::string& s) {
  if (s == "marsrover") return GridKind::Marsrover;
  if (s == "box") return GridKind::Box;
  throw ConfigError("unknown grid kind '" + s + "'");
}

inline const char* to_string(GridKind kind) {
  return kind == GridKind::Marsrover ? "marsrover" : "box";
}

// Grid file: optional `key = value` header (kind, slip, threshold[i]), a
// blank line, then the grid rows.
inline GridSpec parse_grid(std::string_view text) {
  std::vector<std::string> lines = split_lines(text);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();

  GridSpec spec;
  std::size_t first = 0;
  if (!lines.empty() && lines.front().find('=') != std::string::npos) {
    std::size_t blank = 0;
    while (blank < lines.size() && !trim(lines[blank]).empty()) ++blank;
    const KeyValues header = parse_key_values(
        std::vector<std::string>(lines.begin(),
                                 lines.begin() + static_cast<std::ptrdiff_t>(blank)),
        1);
    for (const std::string& key : header.keys()) {
      if (key != "kind" && key != "slip" && key.rfind("threshold[", 0) != 0) {
        throw ParseError("unknown header key '" + key + "'",
                         header.line_of(key), 1);
      }
    }
    spec.kind = parse_grid_kind(header.get_string("kind", "marsrover"));
    spec.slip = header.get_double("slip", 0.1);
    spec.thresholds = header.get_indexed("threshold");
    first = blank;
    while (first < lines.size() && trim(lines[first]).empty()) ++first;
  }
  if (!(spec.slip >= 0.0 && spec.slip < 1.0)) {
    throw ParseError("slip must lie in [0, 1)", 1, 1);
  }

  const int first_row_line = static_cast<int>(first) + 1;
  for (std::size_t i = first; i < lines.size(); ++i) {
    spec.cells.push_back(lines[i]);
  }
  if (spec.cells.empty()) throw ParseError("empty grid", first_row_line, 1);

  const std::string legend = "#.SGRB";
  std::optional<Cell> start, goal, box;
  for (int r = 0; r < spec.rows(); ++r) {
    const std::string& row = spec.cells[static_cast<std::size_t>(r)];
    if (static_cast<int>(row.size()) != spec.cols()) {
      throw ParseError("ragged grid row", first_row_line + r,
                       static_cast<int>(row.size()) + 1);
    }
    for (int c = 0; c < spec.cols(); ++c) {
      const char ch = row[static_cast<std::size_t>(c)];
      if (legend.find(ch) == std::string::npos) {
        throw ParseError(std::string("unknown grid character '") + ch + "'",
                         first_row_line + r, c + 1);
      }
      const bool border =
          r == 0 || c == 0 || r == spec.rows() - 1 || c == spec.cols() - 1;
      if (border && ch != '#') {
        throw ParseError("grid border must be '#'", first_row_line + r, c + 1);
      }
      auto unique = [&](std::optional<Cell>& slot, const char* what) {
        if (slot) {
          throw ParseError(std::string("duplicate '") + what + "'",
                           first_row_line + r, c + 1);
        }
        slot = Cell{r, c};
      };
      if (ch == 'S') unique(start, "S");
      if (ch == 'G') unique(goal, "G");
      if (ch == 'B') unique(box, "B");
    }
  }
  if (!start) throw ParseError("grid has no 'S'", first_row_line, 1);
  if (!goal) throw ParseError("grid has no 'G'", first_row_line, 1);
  return spec;
}

inline GridSpec load_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open grid file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_grid(buf.str());
}

// Free cells are states (row-major). Moving into a wall leaves the agent in
// place; the intended direction is taken with probability 1 - slip and each
// perpendicular direction with slip / 2. Every action in 'G' returns to 'S'.
inline EnvInstance compile_marsrover(const GridSpec& spec,
                                     std::string name = "marsrover") {
  if (spec.kind != GridKind::Marsrover) {
    throw ConfigError("compile_marsrover: grid kind is " +
                      std::string(to_string(spec.kind)));
  }
  for (const std::string& row : spec.cells) {
    if (row.find('B') != std::string::npos) {
      throw ConfigError("compile_marsrover: 'B' is only valid in box grids");
    }
  }
  if (spec.thresholds.size() > 1) {
    throw ConfigError("compile_marsrover: at most one threshold");
  }

  std::map<Cell, int> index;
  EnvInstance env;
  env.name = std::move(name);
  for (int r = 0; r < spec.rows(); ++r) {
    for (int c = 0; c < spec.cols(); ++c) {
      if (spec.is_wall({r, c})) continue;
      index[{r, c}] = static_cast<int>(env.labels.size());
      env.labels.push_back({{r, c}, {-1, -1}, detail::cell_name({r, c})});
    }
  }
  const int S = static_cast<int>(env.labels.size());
  const int A = 4;
  const Cell start = spec.find('S');
  const Cell goal = spec.find('G');

  Transitions p(S, A);
  CostMatrix main = CostMatrix::Ones(S, A);
  CostMatrix risk = CostMatrix::Zero(S, A);
  for (int s = 0; s < S; ++s) {
    const Cell here = env.labels[static_cast<std::size_t>(s)].agent;
    for (int a = 0; a < A; ++a) {
      if (here == goal) {
        p(s, a, index.at(start)) = 1.0;
        main(s, a) = 0.0;
        continue;
      }
      for (const auto& [dir, prob] : detail::slip_outcomes(a, spec.slip)) {
        Cell next = detail::step(here, dir);
        if (spec.is_wall(next)) next = here;
        p(s, a, index.at(next)) += prob;
      }
      if (spec.at(here) == 'R') risk(s, a) = 1.0;
    }
  }
  std::vector<CostMatrix> costs{main};
  if (!spec.thresholds.empty()) costs.push_back(risk);
  env.model = Cmdp{std::move(p), std::move(costs), spec.thresholds};
  env.initial_state = index.at(start);
  if (!target_reachable(env.model.transitions, index.at(goal))) {
    throw InputError(env.name + ": goal unreachable from some cell");
  }
  detail::finish_instance(env);
  return env;
}

// A box sits at most in one of the free cells; it counts as in a corner when
// at least two of its four neighbours are walls.
inline bool box_in_corner(const GridSpec& spec, Cell box) {
  int walls = 0;
  for (int dir = 0; dir < 4; ++dir) walls += spec.is_wall(detail::step(box, dir));
  return walls >= 2;
}

// States are (agent, box) configurations reachable from the start. Walking
// into the box pushes it one cell along the move if that cell is free (not a
// wall and not the goal); otherwise the move fails. Reaching 'G' resets both
// agent and box to their initial cells.
inline EnvInstance compile_box(const GridSpec& spec, std::string name = "box") {
  if (spec.kind != GridKind::Box) {
    throw ConfigError("compile_box: grid kind is " +
                      std::string(to_string(spec.kind)));
  }
  if (spec.thresholds.size() > 1) {
    throw ConfigError("compile_box: at most one threshold");
  }
  const Cell start = spec.find('S');
  const Cell goal = spec.find('G');
  const Cell box0 = spec.find('B');

  using Config = std::pair<Cell, Cell>;  // (agent, box)
  auto successors = [&](const Config& cfg, int action) {
    std::vector<std::pair<Config, double>> out;
    if (cfg.first == goal) {
      out.push_back({{start, box0}, 1.0});
      return out;
    }
    for (const auto& [dir, prob] : detail::slip_outcomes(action, spec.slip)) {
      Config next = cfg;
      const Cell target = detail::step(cfg.first, dir);
      if (!spec.is_wall(target)) {
        if (target == cfg.second) {
          const Cell pushed = detail::step(cfg.second, dir);
          if (!spec.is_wall(pushed) && pushed != goal) next = {target, pushed};
        } else {
          next.first = target;
        }
      }
      out.push_back({next, prob});
    }
    return out;
  };

  std::set<Config> seen{{start, box0}};
  std::deque<Config> queue{{start, box0}};
  while (!queue.empty()) {
    const Config cfg = queue.front();
    queue.pop_front();
    for (int a = 0; a < 4; ++a) {
      for (const auto& [next, prob] : successors(cfg, a)) {
        if (prob > 0.0 && seen.insert(next).second) queue.push_back(next);
      }
    }
  }

  EnvInstance env;
  env.name = std::move(name);
  std::map<Config, int> index;
  for (const Config& cfg : seen) {
    index[cfg] = static_cast<int>(env.labels.size());
    env.labels.push_back({cfg.first, cfg.second,
                          "agent" + detail::cell_name(cfg.first) + " box" +
                              detail::cell_name(cfg.second)});
  }
  const int S = static_cast<int>(env.labels.size());
  Transitions p(S, 4);
  CostMatrix main = CostMatrix::Ones(S, 4);
  CostMatrix corner = CostMatrix::Zero(S, 4);
  for (const auto& [cfg, s] : index) {
    for (int a = 0; a < 4; ++a) {
      for (const auto& [next, prob] : successors(cfg, a)) {
        p(s, a, index.at(next)) += prob;
      }
      if (cfg.first == goal) main(s, a) = 0.0;
      if (box_in_corner(spec, cfg.second)) corner(s, a) = 1.0;
    }
  }
  std::vector<CostMatrix> costs{main};
  if (!spec.thresholds.empty()) costs.push_back(corner);
  env.model = Cmdp{std::move(p), std::move(costs), spec.thresholds};
  env.initial_state = index.at({start, box0});
  detail::finish_instance(env);
  return env;
}

inline EnvInstance compile_grid(const GridSpec& spec, std::string name) {
  return spec.kind == GridKind::Box ? compile_box(spec, std::move(name))
                                    : compile_marsrover(spec, std::move(name));
}

struct EnvStep {
  int next_state = 0;
  std::vector<double> costs;  // c0..cm of the (s, a) just taken
};

inline EnvStep env_step(const EnvInstance& env, int s, int a, Rng& rng) {
  const Cmdp& model = env.model;
  if (s < 0 || s >= model.n_states() || a < 0 || a >= model.n_actions()) {
    throw InputError("env_step: (s,a) out of range");
  }
  EnvStep out;
  out.next_state = rng.categorical(model.transitions.row(s, a));
  out.costs.reserve(model.costs.size());
  for (const CostMatrix& c : model.costs) out.costs.push_back(c(s, a));
  return out;
}

}  // namespace psconrl
