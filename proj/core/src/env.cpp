#include "traitor/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "traitor/errors.hpp"
#include "traitor/rng.hpp"
#include "traitor/text_io.hpp"

namespace traitor {
namespace {

bool in_bounds(const ScenarioConfig& c, int x, int y) {
  return x >= 0 && y >= 0 && x < c.grid_width && y < c.grid_height;
}

int chebyshev(const Unit& a, const Unit& b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

bool opposing(Team a, Team b) {
  if (a == Team::enemy) return b != Team::enemy;
  return b == Team::enemy;
}

std::pair<int, int> move_target(const Unit& u, AgentAction::Kind kind) {
  switch (kind) {
    case AgentAction::Kind::north: return {u.x, u.y - 1};
    case AgentAction::Kind::south: return {u.x, u.y + 1};
    case AgentAction::Kind::east: return {u.x + 1, u.y};
    case AgentAction::Kind::west: return {u.x - 1, u.y};
    default: return {u.x, u.y};
  }
}

bool is_move(AgentAction::Kind kind) {
  return kind == AgentAction::Kind::north || kind == AgentAction::Kind::south ||
         kind == AgentAction::Kind::east || kind == AgentAction::Kind::west;
}

// First unit index of the side a `actor` attacks, and that side's size.
std::pair<int, int> opposing_range(const ScenarioConfig& c, Team actor) {
  if (actor == Team::enemy) return {0, c.num_victims + c.num_traitors};
  return {c.first_enemy(), c.num_enemies};
}

double normalized(int value, int extent) { return extent > 1 ? static_cast<double>(value) / (extent - 1) : 0.0; }

const char* layout_name(SpawnLayout layout) {
  switch (layout) {
    case SpawnLayout::lines: return "lines";
    case SpawnLayout::corners: return "corners";
    case SpawnLayout::explicit_coordinates: return "explicit";
  }
  return "lines";
}

// Places `count` units in a two-column block at columns {base, base + 1}:
// a random row offset, a random unit-to-row assignment and a random column per unit.
void place_column_block(std::vector<Unit>& units, int first, int count, int base_column, int height, Rng& rng) {
  if (count == 0) return;
  const int offset = rng.below(height - count + 1);
  std::vector<int> rows(count);
  std::iota(rows.begin(), rows.end(), offset);
  for (int i = count - 1; i > 0; --i) std::swap(rows[i], rows[rng.below(i + 1)]);
  for (int i = 0; i < count; ++i) {
    units[first + i].x = base_column + rng.below(2);
    units[first + i].y = rows[i];
  }
}

// Spreads `count` units over the full height: unit k gets a random row in the
// k-th of `count` disjoint bands [ceil(k*H/count), ceil((k+1)*H/count)).
void place_spread_line(std::vector<Unit>& units, int first, int count, int base_column, int height, Rng& rng) {
  if (count == 0) return;
  std::vector<int> rows(count);
  for (int k = 0; k < count; ++k) {
    const int lo = (k * height + count - 1) / count;
    const int hi = ((k + 1) * height + count - 1) / count;
    rows[k] = lo + rng.below(hi - lo);
  }
  for (int i = count - 1; i > 0; --i) std::swap(rows[i], rows[rng.below(i + 1)]);
  for (int i = 0; i < count; ++i) {
    units[first + i].x = base_column + rng.below(2);
    units[first + i].y = rows[i];
  }
}

// Puts traitors into the free cells of the victim block (the unused column of a
// victim's row), so the allies form one block. Overflow goes to x = 1, then x = 0.
void place_inside_block(std::vector<Unit>& units, int first, int count, int victims, int base_column, int height,
                        Rng& rng) {
  if (count == 0) return;
  std::vector<std::pair<int, int>> free;
  for (int v = 0; v < victims; ++v) {
    free.emplace_back(units[v].x == base_column ? base_column + 1 : base_column, units[v].y);
  }
  for (int i = static_cast<int>(free.size()) - 1; i > 0; --i) std::swap(free[i], free[rng.below(i + 1)]);
  for (int x = base_column - 1; x >= 0 && static_cast<int>(free.size()) < count; --x) {
    for (int y = 0; y < height; ++y) free.emplace_back(x, y);
  }
  for (int i = 0; i < count; ++i) {
    units[first + i].x = free[i].first;
    units[first + i].y = free[i].second;
  }
}

void place_corner_block(std::vector<Unit>& units, int first, int count, const ScenarioConfig& c, bool from_origin) {
  int side = 1;
  while (side * side < count) ++side;
  for (int i = 0; i < count; ++i) {
    const int dx = i % side;
    const int dy = i / side;
    units[first + i].x = from_origin ? dx : c.grid_width - 1 - dx;
    units[first + i].y = from_origin ? dy : c.grid_height - 1 - dy;
  }
}

}  // namespace

Team ScenarioConfig::team_of(int unit) const {
  if (unit < 0 || unit >= num_units()) throw std::invalid_argument("unit index out of range");
  if (unit < num_victims) return Team::victim;
  if (unit < first_enemy()) return Team::traitor;
  return Team::enemy;
}

int ScenarioConfig::num_actions(Team team) const {
  switch (team) {
    case Team::victim: return 5 + num_enemies;
    case Team::traitor: return 5;
    case Team::enemy: return 5 + num_victims + num_traitors;
  }
  return 5;
}

void validate(const ScenarioConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("scenario: ") + what);
  };
  require(c.grid_width > 0 && c.grid_height > 0, "grid dimensions must be positive");
  require(c.num_victims >= 0 && c.num_traitors >= 0 && c.num_enemies >= 0, "unit counts must be non-negative");
  require(c.max_health > 0, "max_health must be positive");
  require(c.attack_range > 0, "attack_range must be positive");
  require(c.attack_damage > 0, "attack_damage must be positive");
  require(c.max_steps > 0, "max_steps must be positive");
  require(c.win_bonus >= 0.0, "win_bonus must be non-negative");
  require(c.num_units() <= c.grid_width * c.grid_height, "more units than grid cells");
  switch (c.layout) {
    case SpawnLayout::lines:
      require(c.grid_width >= 8, "lines layout needs grid_width >= 8");
      require(c.num_victims <= c.grid_height && c.num_traitors <= c.grid_height && c.num_enemies <= c.grid_height,
              "lines layout needs every team to fit in one column");
      break;
    case SpawnLayout::corners: {
      auto side = [](int n) {
        int s = 1;
        while (s * s < n) ++s;
        return s;
      };
      const int ally_side = side(c.num_victims + c.num_traitors);
      const int enemy_side = side(c.num_enemies);
      require(ally_side + enemy_side <= std::min(c.grid_width, c.grid_height) || c.num_enemies == 0 ||
                  c.num_victims + c.num_traitors == 0,
              "corner blocks overlap");
      break;
    }
    case SpawnLayout::explicit_coordinates: {
      require(static_cast<int>(c.spawns.size()) == c.num_units(), "explicit spawns must list every unit");
      std::vector<std::pair<int, int>> seen = c.spawns;
      for (const auto& [x, y] : seen) require(in_bounds(c, x, y), "explicit spawn out of bounds");
      std::sort(seen.begin(), seen.end());
      require(std::adjacent_find(seen.begin(), seen.end()) == seen.end(), "overlapping explicit spawns");
      break;
    }
  }
}

ScenarioConfig without_traitors(const ScenarioConfig& config) {
  ScenarioConfig c = config;
  if (c.layout == SpawnLayout::explicit_coordinates && !c.spawns.empty()) {
    c.spawns.erase(c.spawns.begin() + c.first_traitor(), c.spawns.begin() + c.first_enemy());
  }
  c.num_traitors = 0;
  return c;
}

std::string write_scenario(const ScenarioConfig& c) {
  std::ostringstream out;
  out << "grid_width = " << c.grid_width << '\n'
      << "grid_height = " << c.grid_height << '\n'
      << "num_victims = " << c.num_victims << '\n'
      << "num_traitors = " << c.num_traitors << '\n'
      << "num_enemies = " << c.num_enemies << '\n'
      << "max_health = " << c.max_health << '\n'
      << "attack_range = " << c.attack_range << '\n'
      << "attack_damage = " << c.attack_damage << '\n'
      << "max_steps = " << c.max_steps << '\n'
      << "win_bonus = " << format_double(c.win_bonus) << '\n'
      << "layout = " << layout_name(c.layout) << '\n';
  if (c.layout == SpawnLayout::explicit_coordinates) {
    out << "spawns =";
    for (std::size_t i = 0; i < c.spawns.size(); ++i) {
      out << (i ? "; " : " ") << c.spawns[i].first << ',' << c.spawns[i].second;
    }
    out << '\n';
  }
  out << "enemy_ai = " << (c.enemy_behavior == EnemyBehavior::idle ? "idle" : "scripted") << '\n'
      << "seed = " << c.seed << '\n';
  return out.str();
}

ScenarioConfig parse_scenario(std::istream& in) {
  ScenarioConfig c;
  const KeyValueMap map = parse_key_values(in);
  for (const auto& [key, entry] : map) {
    const std::string& v = entry.value;
    const int line = entry.line;
    auto as_int = [&] { return static_cast<int>(parse_int(v, line)); };
    if (key == "grid_width") c.grid_width = as_int();
    else if (key == "grid_height") c.grid_height = as_int();
    else if (key == "num_victims") c.num_victims = as_int();
    else if (key == "num_traitors") c.num_traitors = as_int();
    else if (key == "num_enemies") c.num_enemies = as_int();
    else if (key == "max_health") c.max_health = as_int();
    else if (key == "attack_range") c.attack_range = as_int();
    else if (key == "attack_damage") c.attack_damage = as_int();
    else if (key == "max_steps") c.max_steps = as_int();
    else if (key == "win_bonus") c.win_bonus = parse_double(v, line);
    else if (key == "seed") c.seed = parse_u64(v, line);
    else if (key == "layout") {
      if (v == "lines") c.layout = SpawnLayout::lines;
      else if (v == "corners") c.layout = SpawnLayout::corners;
      else if (v == "explicit") c.layout = SpawnLayout::explicit_coordinates;
      else throw ParseError(line, "unknown layout '" + v + "'");
    } else if (key == "enemy_ai") {
      if (v == "scripted") c.enemy_behavior = EnemyBehavior::scripted;
      else if (v == "idle") c.enemy_behavior = EnemyBehavior::idle;
      else throw ParseError(line, "unknown enemy_ai '" + v + "'");
    } else if (key == "spawns") {
      c.spawns.clear();
      for (const auto pair : split(v, ';')) {
        const auto xy = split(trim(pair), ',');
        if (xy.size() != 2) throw ParseError(line, "spawns entries must be 'x,y'");
        c.spawns.emplace_back(static_cast<int>(parse_int(xy[0], line)), static_cast<int>(parse_int(xy[1], line)));
      }
    } else {
      throw ParseError(line, "unknown key '" + key + "'");
    }
  }
  validate(c);
  return c;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file '" + path + "'");
  return parse_scenario(in);
}

std::uint64_t scenario_hash(const ScenarioConfig& config) {
  ScenarioConfig c = config;
  c.seed = 0;
  return fnv1a64(write_scenario(c));
}

std::vector<int> state_key(const WorldState& state) {
  std::vector<int> key;
  key.reserve(state.units.size() * 3 + 1);
  key.push_back(state.t);
  for (const Unit& u : state.units) {
    key.push_back(u.x);
    key.push_back(u.y);
    key.push_back(u.health);
  }
  return key;
}

std::uint64_t state_id(const WorldState& state) {
  const auto key = state_key(state);
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(key.data()), key.size() * sizeof(int)));
}

int action_id(const ScenarioConfig& c, Team actor, const AgentAction& a) {
  using K = AgentAction::Kind;
  switch (a.kind) {
    case K::noop: return 0;
    case K::north: return 1;
    case K::south: return 2;
    case K::east: return 3;
    case K::west: return 4;
    case K::attack: {
      if (actor == Team::traitor) throw std::invalid_argument("traitors have no attack actions");
      const auto [first, count] = opposing_range(c, actor);
      if (a.target < first || a.target >= first + count) throw std::invalid_argument("attack target not on opposing side");
      return 5 + a.target - first;
    }
  }
  return 0;
}

AgentAction action_from_id(const ScenarioConfig& c, Team actor, int id) {
  using K = AgentAction::Kind;
  if (id < 0 || id >= c.num_actions(actor)) throw std::invalid_argument("action id out of range");
  switch (id) {
    case 0: return AgentAction::noop();
    case 1: return AgentAction::move(K::north);
    case 2: return AgentAction::move(K::south);
    case 3: return AgentAction::move(K::east);
    case 4: return AgentAction::move(K::west);
    default: return AgentAction::attack(opposing_range(c, actor).first + id - 5);
  }
}

std::string action_token(const AgentAction& a) {
  using K = AgentAction::Kind;
  switch (a.kind) {
    case K::noop: return "n";
    case K::north: return "N";
    case K::south: return "S";
    case K::east: return "E";
    case K::west: return "W";
    case K::attack: return "A" + std::to_string(a.target);
  }
  return "n";
}

AgentAction parse_action_token(std::string_view token, int line) {
  using K = AgentAction::Kind;
  token = trim(token);
  if (token == "n") return AgentAction::noop();
  if (token == "N") return AgentAction::move(K::north);
  if (token == "S") return AgentAction::move(K::south);
  if (token == "E") return AgentAction::move(K::east);
  if (token == "W") return AgentAction::move(K::west);
  if (token.size() > 1 && token[0] == 'A') return AgentAction::attack(static_cast<int>(parse_int(token.substr(1), line)));
  throw ParseError(line, "unknown action token '" + std::string(token) + "'");
}

WorldState reset(const ScenarioConfig& config, std::uint64_t seed) {
  validate(config);
  WorldState s;
  s.units.resize(config.num_units());
  for (int i = 0; i < config.num_units(); ++i) {
    s.units[i].team = config.team_of(i);
    s.units[i].health = config.max_health;
    s.units[i].alive = true;
  }
  switch (config.layout) {
    case SpawnLayout::lines: {
      // Victims and enemies draw first so a scenario and its traitor-free
      // variant share their placement for the same seed.
      Rng rng(seed);
      place_column_block(s.units, 0, config.num_victims, 2, config.grid_height, rng);
      place_spread_line(s.units, config.first_enemy(), config.num_enemies, config.grid_width - 4,
                        config.grid_height, rng);
      place_inside_block(s.units, config.first_traitor(), config.num_traitors, config.num_victims, 2,
                         config.grid_height, rng);
      break;
    }
    case SpawnLayout::corners:
      place_corner_block(s.units, 0, config.num_victims + config.num_traitors, config, true);
      place_corner_block(s.units, config.first_enemy(), config.num_enemies, config, false);
      break;
    case SpawnLayout::explicit_coordinates:
      for (int i = 0; i < config.num_units(); ++i) {
        s.units[i].x = config.spawns[i].first;
        s.units[i].y = config.spawns[i].second;
      }
      break;
  }
  return s;
}

bool all_dead(const WorldState& state, int first, int last) {
  for (int i = first; i < last; ++i) {
    if (state.units[i].alive) return false;
  }
  return true;
}

StepOutcome step(const ScenarioConfig& c, const WorldState& state, std::span<const AgentAction> actions) {
  const int n = c.num_units();
  if (static_cast<int>(state.units.size()) != n) throw std::invalid_argument("step: state does not match scenario");
  if (static_cast<int>(actions.size()) != n) throw std::invalid_argument("step: need one action per unit");
  if (state.t >= c.max_steps) throw std::invalid_argument("step: episode horizon already reached");

  std::vector<int> damage(n, 0);
  for (int i = 0; i < n; ++i) {
    const Unit& u = state.units[i];
    const AgentAction& a = actions[i];
    if (!u.alive) {
      if (a.kind != AgentAction::Kind::noop) throw std::invalid_argument("step: action for dead unit");
      continue;
    }
    if (a.kind != AgentAction::Kind::attack) continue;
    if (u.team == Team::traitor) throw std::invalid_argument("step: traitors cannot attack");
    if (a.target < 0 || a.target >= n) throw std::invalid_argument("step: attack target out of range");
    const Unit& target = state.units[a.target];
    if (!target.alive || !opposing(u.team, target.team)) throw std::invalid_argument("step: invalid attack target");
    if (chebyshev(u, target) > c.attack_range) throw std::invalid_argument("step: attack target not in range");
    damage[a.target] += c.attack_damage;
  }

  StepOutcome out;
  out.next_state = state;
  auto& units = out.next_state.units;
  for (int i = 0; i < n; ++i) {
    if (damage[i] == 0) continue;
    const int dealt = std::min(damage[i], units[i].health);
    if (units[i].team == Team::enemy) out.reward += dealt;
    units[i].health -= dealt;
    if (units[i].health == 0) units[i].alive = false;
  }

  std::vector<int> occupant(static_cast<std::size_t>(c.grid_width) * c.grid_height, -1);
  auto cell = [&](int x, int y) -> int& { return occupant[static_cast<std::size_t>(y) * c.grid_width + x]; };
  for (int i = 0; i < n; ++i) {
    if (units[i].alive) cell(units[i].x, units[i].y) = i;
  }
  for (int i = 0; i < n; ++i) {
    if (!units[i].alive || !is_move(actions[i].kind)) continue;
    const auto [x, y] = move_target(units[i], actions[i].kind);
    if (!in_bounds(c, x, y) || cell(x, y) != -1) continue;
    cell(units[i].x, units[i].y) = -1;
    units[i].x = x;
    units[i].y = y;
    cell(x, y) = i;
  }

  out.next_state.t = state.t + 1;
  out.won = all_dead(out.next_state, c.first_enemy(), n);
  if (out.won) out.reward += c.win_bonus;
  const bool lost = c.num_victims > 0 && all_dead(out.next_state, 0, c.num_victims);
  out.done = out.won || lost || out.next_state.t >= c.max_steps;
  return out;
}

StepOutcome step(const ScenarioConfig& c, const WorldState& state, std::span<const AgentAction> ally_actions,
                 std::span<const AgentAction> enemy_actions) {
  if (static_cast<int>(ally_actions.size()) != c.first_enemy() ||
      static_cast<int>(enemy_actions.size()) != c.num_enemies) {
    throw std::invalid_argument("step: action count mismatch");
  }
  std::vector<AgentAction> joint(ally_actions.begin(), ally_actions.end());
  joint.insert(joint.end(), enemy_actions.begin(), enemy_actions.end());
  return step(c, state, joint);
}

std::vector<AgentAction> legal_actions(const ScenarioConfig& c, const WorldState& state, int unit) {
  if (unit < 0 || unit >= static_cast<int>(state.units.size())) throw std::invalid_argument("legal_actions: bad unit");
  const Unit& u = state.units[unit];
  if (!u.alive) throw std::invalid_argument("legal_actions: unit is dead");
  using K = AgentAction::Kind;
  std::vector<AgentAction> legal{AgentAction::noop()};
  for (const K k : {K::north, K::south, K::east, K::west}) {
    const auto [x, y] = move_target(u, k);
    if (in_bounds(c, x, y)) legal.push_back(AgentAction::move(k));
  }
  if (u.team != Team::traitor) {
    const auto [first, count] = opposing_range(c, u.team);
    for (int j = first; j < first + count; ++j) {
      const Unit& t = state.units[j];
      if (t.alive && chebyshev(u, t) <= c.attack_range) legal.push_back(AgentAction::attack(j));
    }
  }
  return legal;
}

std::vector<std::uint8_t> legal_mask(const ScenarioConfig& c, const WorldState& state, int unit) {
  const Team team = c.team_of(unit);
  std::vector<std::uint8_t> mask(c.num_actions(team), 0);
  for (const AgentAction& a : legal_actions(c, state, unit)) mask[action_id(c, team, a)] = 1;
  return mask;
}

std::vector<AgentAction> scripted_enemy_policy(const ScenarioConfig& c, const WorldState& state) {
  using K = AgentAction::Kind;
  std::vector<AgentAction> actions(c.num_enemies, AgentAction::noop());
  if (c.enemy_behavior == EnemyBehavior::idle) return actions;
  const int allies = c.first_enemy();
  for (int e = 0; e < c.num_enemies; ++e) {
    const Unit& me = state.units[c.first_enemy() + e];
    if (!me.alive) continue;
    int target = -1;
    for (int a = 0; a < allies; ++a) {
      const Unit& ally = state.units[a];
      if (!ally.alive || chebyshev(me, ally) > c.attack_range) continue;
      if (target < 0 || ally.health < state.units[target].health) target = a;
    }
    if (target >= 0) {
      actions[e] = AgentAction::attack(target);
      continue;
    }
    int nearest = -1;
    int best = 0;
    for (int a = 0; a < allies; ++a) {
      const Unit& ally = state.units[a];
      if (!ally.alive) continue;
      const int d = std::abs(ally.x - me.x) + std::abs(ally.y - me.y);
      if (nearest < 0 || d < best) {
        nearest = a;
        best = d;
      }
    }
    if (nearest < 0) continue;
    const int dx = state.units[nearest].x - me.x;
    const int dy = state.units[nearest].y - me.y;
    if (std::abs(dx) >= std::abs(dy) && dx != 0) {
      actions[e] = AgentAction::move(dx > 0 ? K::east : K::west);
    } else if (dy != 0) {
      actions[e] = AgentAction::move(dy > 0 ? K::south : K::north);
    }
  }
  return actions;
}

namespace {

Vec observe_impl(const ScenarioConfig& c, const WorldState& state, int unit, bool include_traitors) {
  if (unit < 0 || unit >= static_cast<int>(state.units.size())) throw std::invalid_argument("observe: bad unit");
  const Unit& me = state.units[unit];
  if (!me.alive) throw std::invalid_argument("observe: unit is dead");
  const int traitors = include_traitors ? c.num_traitors : 0;
  const int others = c.num_victims + traitors + c.num_enemies - 1;
  Vec obs = Vec::Zero(3 + 4 * others);
  obs(0) = normalized(me.x, c.grid_width);
  obs(1) = normalized(me.y, c.grid_height);
  obs(2) = static_cast<double>(me.health) / c.max_health;
  int slot = 0;
  for (int i = 0; i < c.num_units(); ++i) {
    if (i == unit) continue;
    const Unit& other = state.units[i];
    if (!include_traitors && other.team == Team::traitor) continue;
    const int base = 3 + 4 * slot++;
    if (!other.alive) continue;
    obs(base) = 1.0;
    obs(base + 1) = other.x - me.x;
    obs(base + 2) = other.y - me.y;
    obs(base + 3) = static_cast<double>(other.health) / c.max_health;
  }
  return obs;
}

}  // namespace

Vec observe(const ScenarioConfig& c, const WorldState& state, int unit) { return observe_impl(c, state, unit, true); }

Vec observe_without_traitors(const ScenarioConfig& c, const WorldState& state, int unit) {
  if (c.team_of(unit) == Team::traitor) throw std::invalid_argument("observe_without_traitors: unit is a traitor");
  return observe_impl(c, state, unit, false);
}

int observation_size(const ScenarioConfig& c) { return 3 + 4 * (c.num_units() - 1); }

Vec global_state(const ScenarioConfig& c, const WorldState& state) {
  Vec g = Vec::Zero(global_state_size(c));
  for (int i = 0; i < c.num_units(); ++i) {
    const Unit& u = state.units[i];
    if (!u.alive) continue;
    g(4 * i) = 1.0;
    g(4 * i + 1) = normalized(u.x, c.grid_width);
    g(4 * i + 2) = normalized(u.y, c.grid_height);
    g(4 * i + 3) = static_cast<double>(u.health) / c.max_health;
  }
  g(g.size() - 1) = static_cast<double>(state.t) / c.max_steps;
  return g;
}

int global_state_size(const ScenarioConfig& c) { return 4 * c.num_units() + 1; }

}  // namespace traitor
