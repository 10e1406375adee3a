#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "traitor/env.hpp"
#include "traitor/errors.hpp"
#include "traitor/rng.hpp"

using namespace traitor;

namespace {

using K = AgentAction::Kind;

ScenarioConfig explicit_scenario(int victims, int traitors, int enemies, std::vector<std::pair<int, int>> spawns,
                                 int width = 8, int height = 6) {
  ScenarioConfig c;
  c.grid_width = width;
  c.grid_height = height;
  c.num_victims = victims;
  c.num_traitors = traitors;
  c.num_enemies = enemies;
  c.layout = SpawnLayout::explicit_coordinates;
  c.spawns = std::move(spawns);
  return c;
}

ScenarioConfig default_8v6() {
  ScenarioConfig c;
  c.num_traitors = 2;
  return c;
}

std::vector<AgentAction> noops(const ScenarioConfig& c) { return std::vector<AgentAction>(c.num_units()); }

void expect_no_overlap(const WorldState& s) {
  std::set<std::pair<int, int>> cells;
  for (const Unit& u : s.units) {
    if (u.alive) EXPECT_TRUE(cells.insert({u.x, u.y}).second) << "two units at " << u.x << "," << u.y;
  }
}

}  // namespace

TEST(Reset, LinesLayoutSplitsTheBoard) {
  const ScenarioConfig c = default_8v6();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const WorldState s = reset(c, seed);
    ASSERT_EQ(s.units.size(), 14u);
    EXPECT_EQ(s.t, 0);
    expect_no_overlap(s);
    for (int i = 0; i < c.num_units(); ++i) {
      const Unit& u = s.units[i];
      EXPECT_EQ(u.health, 10);
      EXPECT_TRUE(u.alive);
      if (i < 6) {
        EXPECT_EQ(u.team, Team::victim);
        EXPECT_TRUE(u.x == 2 || u.x == 3);
      } else if (i < 8) {
        EXPECT_EQ(u.team, Team::traitor);
        EXPECT_TRUE(u.x == 2 || u.x == 3);
        bool shares_row = false;
        for (int v = 0; v < 6; ++v) shares_row = shares_row || s.units[v].y == u.y;
        EXPECT_TRUE(shares_row);
      } else {
        EXPECT_EQ(u.team, Team::enemy);
        EXPECT_TRUE(u.x == 12 || u.x == 13);
      }
      EXPECT_EQ(u.x < c.grid_width / 2, i < 8);
    }
  }
}

TEST(Reset, TraitorsDoNotMoveTheOtherUnits) {
  const ScenarioConfig c = default_8v6();
  ScenarioConfig plain = c;
  plain.num_traitors = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const WorldState with = reset(c, seed);
    const WorldState without = reset(plain, seed);
    for (int v = 0; v < c.num_victims; ++v) {
      EXPECT_EQ(with.units[v].x, without.units[v].x);
      EXPECT_EQ(with.units[v].y, without.units[v].y);
    }
    for (int e = 0; e < c.num_enemies; ++e) {
      EXPECT_EQ(with.units[c.first_enemy() + e].x, without.units[plain.first_enemy() + e].x);
      EXPECT_EQ(with.units[c.first_enemy() + e].y, without.units[plain.first_enemy() + e].y);
    }
  }
}

TEST(Reset, ExtraTraitorsOverflowBehindTheBlock) {
  ScenarioConfig c = default_8v6();
  c.num_traitors = 8;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const WorldState s = reset(c, seed);
    expect_no_overlap(s);
    int behind = 0;
    for (int k = 0; k < c.num_traitors; ++k) behind += s.units[c.first_traitor() + k].x == 1;
    EXPECT_EQ(behind, 2);
  }
}

TEST(Reset, EnemyLineCoversTheHeight) {
  const ScenarioConfig c = default_8v6();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const WorldState s = reset(c, seed);
    std::vector<int> rows;
    for (int i = c.first_enemy(); i < c.num_units(); ++i) rows.push_back(s.units[i].y);
    std::sort(rows.begin(), rows.end());
    EXPECT_EQ(std::adjacent_find(rows.begin(), rows.end()), rows.end());
    EXPECT_LE(rows.front(), 1);
    EXPECT_GE(rows.back(), 8);
  }
}

TEST(Reset, TraitorFreeVariantSharesPlacement) {
  const ScenarioConfig c = default_8v6();
  const ScenarioConfig base = without_traitors(c);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const WorldState a = reset(c, seed);
    const WorldState b = reset(base, seed);
    for (int v = 0; v < 6; ++v) EXPECT_EQ(a.units[v], b.units[v]);
    for (int e = 0; e < 6; ++e) EXPECT_EQ(a.units[c.first_enemy() + e], b.units[base.first_enemy() + e]);
  }
}

TEST(Reset, DeterministicPerSeed) {
  const ScenarioConfig c = default_8v6();
  EXPECT_EQ(reset(c, 42), reset(c, 42));
  EXPECT_NE(reset(c, 42), reset(c, 43));
}

TEST(Reset, CornersLayout) {
  ScenarioConfig c;
  c.layout = SpawnLayout::corners;
  c.num_victims = 3;
  c.num_traitors = 1;
  c.num_enemies = 4;
  const WorldState s = reset(c, 0);
  EXPECT_EQ(s.units[0].x, 0);
  EXPECT_EQ(s.units[0].y, 0);
  EXPECT_EQ(s.units[3].x, 1);
  EXPECT_EQ(s.units[3].y, 1);
  EXPECT_EQ(s.units[4].x, 15);
  EXPECT_EQ(s.units[4].y, 9);
  expect_no_overlap(s);
}

TEST(Reset, RejectsOverlappingExplicitSpawns) {
  const ScenarioConfig c = explicit_scenario(1, 0, 1, {{1, 1}, {1, 1}});
  EXPECT_THROW(reset(c, 0), std::invalid_argument);
}

TEST(Step, NoEnemiesIsAVacuousVictory) {
  ScenarioConfig c = default_8v6();
  c.num_enemies = 0;
  const WorldState s = reset(c, 1);
  const StepOutcome out = step(c, s, noops(c));
  EXPECT_TRUE(out.done);
  EXPECT_TRUE(out.won);
  EXPECT_EQ(out.reward, c.win_bonus);
}

TEST(Step, AttackDealsDamage) {
  ScenarioConfig c = explicit_scenario(1, 0, 2, {{2, 2}, {3, 2}, {7, 5}});
  c.max_health = 3;
  const WorldState s = reset(c, 0);
  std::vector<AgentAction> a = noops(c);
  a[0] = AgentAction::attack(1);
  const StepOutcome out = step(c, s, a);
  EXPECT_EQ(out.next_state.units[1].health, 2);
  EXPECT_EQ(out.reward, 1.0);
  EXPECT_FALSE(out.done);
  EXPECT_EQ(out.next_state.t, 1);
}

TEST(Step, AllNoopIsQuiet) {
  const ScenarioConfig c = default_8v6();
  const WorldState s = reset(c, 5);
  const StepOutcome out = step(c, s, noops(c));
  EXPECT_EQ(out.reward, 0.0);
  for (int i = 0; i < c.num_units(); ++i) {
    EXPECT_EQ(out.next_state.units[i].x, s.units[i].x);
    EXPECT_EQ(out.next_state.units[i].y, s.units[i].y);
  }
}

TEST(Step, LowerIndexWinsContestedCell) {
  // Units 0 and 1 both step into (2, 1).
  const ScenarioConfig c = explicit_scenario(2, 0, 1, {{1, 1}, {3, 1}, {7, 5}});
  const WorldState s = reset(c, 0);
  std::vector<AgentAction> a = noops(c);
  a[0] = AgentAction::move(K::east);
  a[1] = AgentAction::move(K::west);
  const StepOutcome out = step(c, s, a);
  EXPECT_EQ(out.next_state.units[0].x, 2);
  EXPECT_EQ(out.next_state.units[1].x, 3);
}

TEST(Step, TraitorBlocksAVictim) {
  const ScenarioConfig c = explicit_scenario(1, 1, 1, {{1, 1}, {2, 1}, {7, 5}});
  const WorldState s = reset(c, 0);
  std::vector<AgentAction> a = noops(c);
  a[0] = AgentAction::move(K::east);
  const StepOutcome out = step(c, s, a);
  EXPECT_EQ(out.next_state.units[0].x, 1);
}

TEST(Step, KillingTheLastEnemyWins) {
  ScenarioConfig c = explicit_scenario(2, 0, 1, {{2, 2}, {4, 2}, {3, 2}});
  c.max_health = 1;
  const WorldState s = reset(c, 0);
  std::vector<AgentAction> a = noops(c);
  a[0] = AgentAction::attack(2);
  a[1] = AgentAction::attack(2);
  const StepOutcome out = step(c, s, a);
  // Overkill is not rewarded: one point of damage plus the bonus.
  EXPECT_EQ(out.reward, 1.0 + c.win_bonus);
  EXPECT_TRUE(out.won);
  EXPECT_TRUE(out.done);
  EXPECT_FALSE(out.next_state.units[2].alive);
}

TEST(Step, HorizonEndsEpisode) {
  ScenarioConfig c = explicit_scenario(1, 0, 1, {{0, 0}, {7, 5}});
  c.max_steps = 2;
  WorldState s = reset(c, 0);
  StepOutcome out = step(c, s, noops(c));
  EXPECT_FALSE(out.done);
  out = step(c, out.next_state, noops(c));
  EXPECT_TRUE(out.done);
  EXPECT_FALSE(out.won);
  EXPECT_THROW(step(c, out.next_state, noops(c)), std::invalid_argument);
}

TEST(Step, VictimsWipedOutLose) {
  ScenarioConfig c = explicit_scenario(1, 0, 1, {{2, 2}, {3, 2}});
  c.max_health = 1;
  const WorldState s = reset(c, 0);
  std::vector<AgentAction> a = noops(c);
  a[1] = AgentAction::attack(0);
  const StepOutcome out = step(c, s, a);
  EXPECT_TRUE(out.done);
  EXPECT_FALSE(out.won);
  EXPECT_EQ(out.reward, 0.0);
}

TEST(Step, RejectsIllegalActions) {
  const ScenarioConfig c = explicit_scenario(1, 1, 1, {{2, 2}, {3, 3}, {6, 2}});
  WorldState s = reset(c, 0);
  std::vector<AgentAction> a = noops(c);
  a[0] = AgentAction::attack(2);  // out of range
  EXPECT_THROW(step(c, s, a), std::invalid_argument);
  a = noops(c);
  a[1] = AgentAction::attack(2);  // traitor attack
  EXPECT_THROW(step(c, s, a), std::invalid_argument);
  s.units[0].alive = false;
  s.units[0].health = 0;
  a = noops(c);
  a[0] = AgentAction::move(K::east);  // dead unit acting
  EXPECT_THROW(step(c, s, a), std::invalid_argument);
  EXPECT_THROW(step(c, s, std::vector<AgentAction>(2)), std::invalid_argument);
}

TEST(LegalActions, TraitorsNeverAttack) {
  const ScenarioConfig c = explicit_scenario(1, 1, 1, {{0, 0}, {3, 3}, {4, 3}});
  const WorldState s = reset(c, 0);
  for (const AgentAction& a : legal_actions(c, s, 1)) EXPECT_NE(a.kind, K::attack);
  EXPECT_EQ(legal_actions(c, s, 1).size(), 5u);
  EXPECT_THROW(action_id(c, Team::traitor, AgentAction::attack(2)), std::invalid_argument);
}

TEST(LegalActions, CornerHasTwoMoves) {
  const ScenarioConfig c = explicit_scenario(1, 0, 1, {{0, 0}, {7, 5}});
  const WorldState s = reset(c, 0);
  const auto legal = legal_actions(c, s, 0);
  EXPECT_EQ(std::count_if(legal.begin(), legal.end(), [](const AgentAction& a) {
              return a.kind != K::noop && a.kind != K::attack;
            }),
            2);
  // Far from the enemy: moves and noop only.
  EXPECT_EQ(legal.size(), 3u);
}

TEST(LegalActions, AttacksInRangeOnly) {
  const ScenarioConfig c = explicit_scenario(1, 0, 2, {{3, 3}, {4, 4}, {6, 3}});
  const WorldState s = reset(c, 0);
  const auto mask = legal_mask(c, s, 0);
  ASSERT_EQ(mask.size(), 7u);
  EXPECT_EQ(mask[5], 1);
  EXPECT_EQ(mask[6], 0);
  WorldState dead = s;
  dead.units[0].alive = false;
  EXPECT_THROW(legal_actions(c, dead, 0), std::invalid_argument);
}

TEST(ActionIds, RoundTrip) {
  const ScenarioConfig c = default_8v6();
  for (const Team team : {Team::victim, Team::traitor, Team::enemy}) {
    for (int id = 0; id < c.num_actions(team); ++id) {
      EXPECT_EQ(action_id(c, team, action_from_id(c, team, id)), id);
      const AgentAction a = action_from_id(c, team, id);
      EXPECT_EQ(parse_action_token(action_token(a), 1), a);
    }
  }
  EXPECT_THROW(parse_action_token("Q", 7), ParseError);
}

TEST(EnemyScript, FocusesLowestHealth) {
  ScenarioConfig c = explicit_scenario(2, 0, 1, {{2, 2}, {4, 2}, {3, 2}});
  WorldState s = reset(c, 0);
  s.units[0].health = 5;
  s.units[1].health = 2;
  const auto a = scripted_enemy_policy(c, s);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0], AgentAction::attack(1));
  s.units[0].health = 2;
  EXPECT_EQ(scripted_enemy_policy(c, s)[0], AgentAction::attack(0));
}

TEST(EnemyScript, MovesAlongTheLargerGap) {
  const ScenarioConfig c = explicit_scenario(1, 0, 1, {{1, 2}, {5, 3}});
  const WorldState s = reset(c, 0);
  EXPECT_EQ(scripted_enemy_policy(c, s)[0], AgentAction::move(K::west));
  // Equal gaps break toward horizontal movement.
  const ScenarioConfig tie = explicit_scenario(1, 0, 1, {{3, 1}, {5, 3}});
  EXPECT_EQ(scripted_enemy_policy(tie, reset(tie, 0))[0], AgentAction::move(K::west));
  const ScenarioConfig vertical = explicit_scenario(1, 0, 1, {{5, 0}, {5, 4}});
  EXPECT_EQ(scripted_enemy_policy(vertical, reset(vertical, 0))[0], AgentAction::move(K::north));
}

TEST(EnemyScript, NoAlliesMeansNoop) {
  const ScenarioConfig c = explicit_scenario(1, 0, 1, {{1, 2}, {5, 3}});
  WorldState s = reset(c, 0);
  s.units[0].alive = false;
  s.units[0].health = 0;
  EXPECT_EQ(scripted_enemy_policy(c, s)[0], AgentAction::noop());
}

TEST(EnemyScript, IdleEnemiesNoop) {
  ScenarioConfig c = explicit_scenario(1, 0, 1, {{1, 2}, {2, 2}});
  c.enemy_behavior = EnemyBehavior::idle;
  EXPECT_EQ(scripted_enemy_policy(c, reset(c, 0))[0], AgentAction::noop());
}

TEST(Observe, LengthFormula) {
  const ScenarioConfig c = default_8v6();
  EXPECT_EQ(observation_size(c), 55);
  EXPECT_EQ(observe(c, reset(c, 0), 0).size(), 55);
  EXPECT_EQ(observe_without_traitors(c, reset(c, 0), 0).size(), 3 + 11 * 4);
  EXPECT_THROW(observe_without_traitors(c, reset(c, 0), 6), std::invalid_argument);
}

TEST(Observe, SingleUnitIsOwnFeaturesOnly) {
  ScenarioConfig c = explicit_scenario(1, 0, 0, {{3, 5}});
  const Vec o = observe(c, reset(c, 0), 0);
  ASSERT_EQ(o.size(), 3);
  EXPECT_DOUBLE_EQ(o(0), 3.0 / 7.0);
  EXPECT_DOUBLE_EQ(o(1), 1.0);
  EXPECT_DOUBLE_EQ(o(2), 1.0);
}

TEST(Observe, RelativeOffsets) {
  ScenarioConfig c = explicit_scenario(2, 0, 1, {{3, 3}, {4, 2}, {7, 5}});
  WorldState s = reset(c, 0);
  const Vec o = observe(c, s, 0);
  EXPECT_EQ(o(3), 1.0);
  EXPECT_EQ(o(4), 1.0);
  EXPECT_EQ(o(5), -1.0);
  s.units[2].alive = false;
  s.units[2].health = 0;
  const Vec dead = observe(c, s, 0);
  for (int i = 7; i < 11; ++i) EXPECT_EQ(dead(i), 0.0);
  EXPECT_THROW(observe(c, s, 2), std::invalid_argument);
}

TEST(GlobalState, LayoutAndLength) {
  const ScenarioConfig c = default_8v6();
  WorldState s = reset(c, 0);
  Vec g = global_state(c, s);
  ASSERT_EQ(g.size(), 57);
  EXPECT_EQ(g(56), 0.0);
  for (int e = c.first_enemy(); e < c.num_units(); ++e) {
    s.units[e].alive = false;
    s.units[e].health = 0;
  }
  s.t = 30;
  g = global_state(c, s);
  EXPECT_DOUBLE_EQ(g(56), 0.5);
  for (int e = c.first_enemy(); e < c.num_units(); ++e) {
    EXPECT_EQ(g(4 * e), 0.0);
    EXPECT_EQ(g(4 * e + 3), 0.0);
  }
}

TEST(Scenario, TextRoundTrip) {
  ScenarioConfig c = explicit_scenario(1, 1, 1, {{0, 0}, {1, 0}, {7, 5}});
  c.win_bonus = 12.5;
  c.seed = 9;
  std::istringstream in(write_scenario(c));
  EXPECT_EQ(parse_scenario(in), c);
  ScenarioConfig d = default_8v6();
  std::istringstream in2(write_scenario(d));
  EXPECT_EQ(parse_scenario(in2), d);
}

TEST(Scenario, ParseErrorsCarryLineNumbers) {
  std::istringstream in("grid_width = 8\n# comment\nbogus = 1\n");
  try {
    parse_scenario(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(Scenario, HashIgnoresSeed) {
  ScenarioConfig a = default_8v6();
  ScenarioConfig b = a;
  b.seed = 77;
  EXPECT_EQ(scenario_hash(a), scenario_hash(b));
  b.max_health = 9;
  EXPECT_NE(scenario_hash(a), scenario_hash(b));
}

TEST(Rollout, InvariantsHoldUnderRandomPlay) {
  const ScenarioConfig c = default_8v6();
  Rng rng(12);
  for (int ep = 0; ep < 30; ++ep) {
    WorldState s = reset(c, rng.next_u64());
    const WorldState start = s;
    std::vector<std::vector<AgentAction>> log;
    double total = 0.0;
    while (true) {
      std::vector<AgentAction> joint(c.num_units());
      for (int i = 0; i < c.first_enemy(); ++i) {
        if (!s.units[i].alive) continue;
        const auto legal = legal_actions(c, s, i);
        joint[i] = legal[rng.below(static_cast<int>(legal.size()))];
      }
      const auto enemy = scripted_enemy_policy(c, s);
      std::copy(enemy.begin(), enemy.end(), joint.begin() + c.first_enemy());
      const StepOutcome out = step(c, s, joint);
      log.push_back(joint);
      EXPECT_GE(out.reward, 0.0);
      EXPECT_EQ(out.next_state.t, s.t + 1);
      expect_no_overlap(out.next_state);
      for (int i = 0; i < c.num_units(); ++i) {
        EXPECT_LE(out.next_state.units[i].health, s.units[i].health);
        EXPECT_EQ(out.next_state.units[i].alive, out.next_state.units[i].health > 0);
      }
      total += out.reward;
      s = out.next_state;
      if (out.done) break;
    }
    EXPECT_LE(total, c.num_enemies * c.max_health + c.win_bonus);
    // Replay reproduces the final state exactly.
    WorldState r = start;
    for (const auto& joint : log) r = step(c, r, joint).next_state;
    EXPECT_EQ(r, s);
  }
}
