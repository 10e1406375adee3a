#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "traitor/nnet.hpp"

namespace traitor {

enum class Team : std::uint8_t { victim, traitor, enemy };

/// lines: victims in a compact two-column block at x in {2, 3}, traitors in the
/// free cells of that block, enemies in a skirmish line spread over the full
/// height at x in {W-4, W-3}. corners: allies fill a square from (0, 0), enemies from
/// (W-1, H-1).
enum class SpawnLayout { lines, corners, explicit_coordinates };

/// How enemies pick actions. `idle` enemies always noop; it exists for
/// enumerable oracle scenarios without combat.
enum class EnemyBehavior { scripted, idle };

struct ScenarioConfig {
  int grid_width = 16;
  int grid_height = 10;
  int num_victims = 6;
  int num_traitors = 0;
  int num_enemies = 6;
  int max_health = 10;
  int attack_range = 1;  // Chebyshev distance
  int attack_damage = 1;
  int max_steps = 60;
  double win_bonus = 20.0;
  SpawnLayout layout = SpawnLayout::lines;
  /// Explicit spawns in unit order (victims, traitors, enemies).
  std::vector<std::pair<int, int>> spawns;
  EnemyBehavior enemy_behavior = EnemyBehavior::scripted;
  std::uint64_t seed = 0;

  int num_units() const { return num_victims + num_traitors + num_enemies; }
  int first_traitor() const { return num_victims; }
  int first_enemy() const { return num_victims + num_traitors; }
  Team team_of(int unit) const;
  /// Size of the per-team action id space (noop, 4 moves, one attack per opposing unit).
  int num_actions(Team team) const;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Throws std::invalid_argument when the config is unusable.
void validate(const ScenarioConfig& config);

/// The same scenario with the traitor roster removed (victim pre-training setting).
ScenarioConfig without_traitors(const ScenarioConfig& config);

/// Canonical `key = value` text; parse_scenario(write_scenario(c)) == c.
std::string write_scenario(const ScenarioConfig& config);
ScenarioConfig parse_scenario(std::istream& in);
ScenarioConfig load_scenario(const std::string& path);

/// Hash of the game rules (everything except the seed).
std::uint64_t scenario_hash(const ScenarioConfig& config);

struct Unit {
  Team team = Team::victim;
  int x = 0;
  int y = 0;
  int health = 0;
  bool alive = false;

  friend bool operator==(const Unit&, const Unit&) = default;
};

/// Dead units keep their last coordinates but occupy no cell.
struct WorldState {
  std::vector<Unit> units;
  int t = 0;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

/// Compact exact key for tabular use.
std::vector<int> state_key(const WorldState& state);
std::uint64_t state_id(const WorldState& state);

struct AgentAction {
  enum class Kind : std::uint8_t { noop, north, south, east, west, attack };
  Kind kind = Kind::noop;
  int target = -1;  // global unit index for attacks

  static AgentAction noop() { return {}; }
  static AgentAction move(Kind k) { return {k, -1}; }
  static AgentAction attack(int target) { return {Kind::attack, target}; }

  friend bool operator==(const AgentAction&, const AgentAction&) = default;
};

/// Action ids: 0 noop, 1 north (y-1), 2 south (y+1), 3 east (x+1), 4 west (x-1),
/// 5+j attack the j-th unit of the opposing side (enemies for allies; victims
/// then traitors for enemies).
int action_id(const ScenarioConfig& config, Team actor, const AgentAction& action);
AgentAction action_from_id(const ScenarioConfig& config, Team actor, int id);

/// Compact text token: n N S E W or A<target>.
std::string action_token(const AgentAction& action);
AgentAction parse_action_token(std::string_view token, int line);

struct StepOutcome {
  WorldState next_state;
  double reward = 0.0;  // victim-team perspective
  bool done = false;
  bool won = false;
};

WorldState reset(const ScenarioConfig& config, std::uint64_t seed);

/// `actions` holds one entry per unit; dead units must carry noop.
/// Resolution: simultaneous attacks, deaths, moves in unit order (blocked moves
/// stay put), then t+1. Reward is enemy damage dealt (overkill excluded) plus
/// win_bonus on the step that eliminates the last enemy.
StepOutcome step(const ScenarioConfig& config, const WorldState& state, std::span<const AgentAction> actions);

/// Convenience form: ally actions for units [0, first_enemy), enemy actions for the rest.
StepOutcome step(const ScenarioConfig& config, const WorldState& state, std::span<const AgentAction> ally_actions,
                 std::span<const AgentAction> enemy_actions);

std::vector<AgentAction> legal_actions(const ScenarioConfig& config, const WorldState& state, int unit);
/// Legal actions as a mask over the unit team's action ids.
std::vector<std::uint8_t> legal_mask(const ScenarioConfig& config, const WorldState& state, int unit);

/// Focus-fire script: attack the lowest-health ally in range (ties: lowest
/// index); otherwise step toward the nearest alive ally (Manhattan distance,
/// ties: lowest index) along the axis with the larger gap (ties: horizontal).
/// Returns one action per enemy slot; dead enemies get noop.
std::vector<AgentAction> scripted_enemy_policy(const ScenarioConfig& config, const WorldState& state);

/// Egocentric features: own (x, y, health) normalized, then per other unit
/// slot (alive, dx, dy, health), zeros for dead units. dx, dy are raw cell offsets.
Vec observe(const ScenarioConfig& config, const WorldState& state, int unit);
int observation_size(const ScenarioConfig& config);

/// observe() with traitor slots omitted: the victims' view of a traitor
/// scenario, shape-compatible with policies trained without traitors.
Vec observe_without_traitors(const ScenarioConfig& config, const WorldState& state, int unit);

/// Per unit slot (alive, x, y, health) normalized, then t / max_steps.
Vec global_state(const ScenarioConfig& config, const WorldState& state);
int global_state_size(const ScenarioConfig& config);

bool all_dead(const WorldState& state, int first, int last);

}  // namespace traitor
