#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "traitor/errors.hpp"
#include "traitor/learners.hpp"

using namespace traitor;

namespace {

ScenarioConfig small_scenario(int traitors = 0) {
  ScenarioConfig c;
  c.grid_width = 8;
  c.grid_height = 4;
  c.num_victims = 2;
  c.num_traitors = traitors;
  c.num_enemies = 2;
  c.max_health = 2;
  c.max_steps = 10;
  return c;
}

LearnerConfig small_config() {
  LearnerConfig lc;
  lc.hidden = {16};
  lc.batch_size = 8;
  lc.learning_starts = 8;
  lc.mixer_embed = 4;
  lc.gamma = 0.9;
  return lc;
}

// Transitions from uniformly random legal play, with the team's units driven by action ids.
std::vector<ReplayItem> random_items(const TeamSpec& team, int count, std::uint64_t seed) {
  const ScenarioConfig& c = team.scenario;
  Rng rng(seed);
  std::vector<ReplayItem> items;
  WorldState s = reset(c, seed);
  while (static_cast<int>(items.size()) < count) {
    std::vector<AgentAction> joint(c.num_units(), AgentAction::noop());
    std::vector<int> ids(team.num_agents(), 0);
    for (int u = 0; u < c.num_units(); ++u) {
      if (!s.units[u].alive) continue;
      const auto legal = legal_actions(c, s, u);
      joint[u] = legal[rng.below(static_cast<int>(legal.size()))];
    }
    for (int i = 0; i < team.num_agents(); ++i) {
      const int u = team.units[i];
      if (s.units[u].alive) ids[i] = action_id(c, team.team, joint[u]);
    }
    StepOutcome out = step(c, s, joint);
    const double reward = team.team == Team::traitor ? -out.reward : out.reward;
    items.push_back({s, ids, reward, out.next_state, out.done});
    s = out.done ? reset(c, seed + items.size()) : out.next_state;
  }
  return items;
}

std::vector<const ReplayItem*> pointers(const std::vector<ReplayItem>& items) {
  std::vector<const ReplayItem*> out;
  for (const ReplayItem& item : items) out.push_back(&item);
  return out;
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)}); }

// Central differences over a spread of entries of one network.
void check_net_gradient(ValueLearner& learner, MlpParams& net, const GradBundle& grads,
                        std::span<const ReplayItem* const> batch) {
  const double h = 1e-6;
  for (int k = 0; k < net.num_layers(); ++k) {
    Mat& w = net.weights[k];
    for (Eigen::Index idx = 0; idx < w.size(); idx += std::max<Eigen::Index>(1, w.size() / 7)) {
      const double saved = w.data()[idx];
      w.data()[idx] = saved + h;
      const double up = learner.loss_and_grads(batch, nullptr);
      w.data()[idx] = saved - h;
      const double down = learner.loss_and_grads(batch, nullptr);
      w.data()[idx] = saved;
      const double fd = (up - down) / (2 * h);
      const double analytic = grads.weights[k].data()[idx];
      if (std::abs(fd) < 1e-7 && std::abs(analytic) < 1e-7) continue;
      EXPECT_LT(relative_error(fd, analytic), 1e-4) << "layer " << k << " entry " << idx;
    }
    Vec& b = net.biases[k];
    for (Eigen::Index idx = 0; idx < b.size(); ++idx) {
      const double saved = b(idx);
      b(idx) = saved + h;
      const double up = learner.loss_and_grads(batch, nullptr);
      b(idx) = saved - h;
      const double down = learner.loss_and_grads(batch, nullptr);
      b(idx) = saved;
      const double fd = (up - down) / (2 * h);
      if (std::abs(fd) < 1e-7 && std::abs(grads.biases[k](idx)) < 1e-7) continue;
      EXPECT_LT(relative_error(fd, grads.biases[k](idx)), 1e-4) << "bias " << k << " entry " << idx;
    }
  }
}

}  // namespace

TEST(TeamSpec, VictimsAreBlindToTraitors) {
  const ScenarioConfig c = small_scenario(1);
  const TeamSpec v = TeamSpec::victims(c);
  EXPECT_EQ(v.units, (std::vector<int>{0, 1}));
  EXPECT_EQ(v.input_dim(), observation_size(without_traitors(c)) + 2);
  const WorldState s = reset(c, 3);
  WorldState moved = s;
  moved.units[2].x = 4;
  moved.units[2].y = 0;
  EXPECT_EQ(v.agent_input(s, 0), v.agent_input(moved, 0));
  const TeamSpec t = TeamSpec::traitors(c);
  EXPECT_EQ(t.units, (std::vector<int>{2}));
  EXPECT_EQ(t.input_dim(), observation_size(c) + global_state_size(c) + 1);
  EXPECT_EQ(t.num_actions(), 5);
}

TEST(TeamSpec, VictimInputScalesOffsetsToTheGrid) {
  const ScenarioConfig c = small_scenario();
  const TeamSpec v = TeamSpec::victims(c);
  const WorldState s = reset(c, 2);
  const Vec obs = observe(c, s, 0);
  const Vec in = v.agent_input(s, 0);
  EXPECT_EQ(in.head(3), obs.head(3));
  for (int base = 3; base + 3 < obs.size(); base += 4) {
    EXPECT_EQ(in(base), obs(base));
    EXPECT_DOUBLE_EQ(in(base + 1), obs(base + 1) / c.grid_width);
    EXPECT_DOUBLE_EQ(in(base + 2), obs(base + 2) / c.grid_height);
    EXPECT_EQ(in(base + 3), obs(base + 3));
  }
}

TEST(TeamSpec, DeadAgentOnlyNoops) {
  const ScenarioConfig c = small_scenario();
  const TeamSpec v = TeamSpec::victims(c);
  WorldState s = reset(c, 1);
  s.units[1].alive = false;
  s.units[1].health = 0;
  const auto mask = v.mask(s, 1);
  EXPECT_EQ(mask[0], 1);
  for (std::size_t a = 1; a < mask.size(); ++a) EXPECT_EQ(mask[a], 0);
  const Vec in = v.agent_input(s, 1);
  EXPECT_EQ(in.head(in.size() - 2).squaredNorm(), 0.0);
  EXPECT_EQ(in(in.size() - 1), 1.0);
}

TEST(ReplayBuffer, RingOverwritesOldest) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) {
    ReplayItem item;
    item.reward = i;
    buf.push(item);
  }
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf.insertions(), 5u);
  EXPECT_EQ(buf.at(0).reward, 3.0);
  EXPECT_EQ(buf.at(1).reward, 4.0);
  EXPECT_EQ(buf.at(2).reward, 2.0);
}

TEST(ReplayBuffer, SamplingIsSeededAndCovers) {
  ReplayBuffer buf(4);
  for (int i = 0; i < 4; ++i) {
    ReplayItem item;
    item.reward = i;
    buf.push(item);
  }
  Rng a(5), b(5);
  const auto sa = buf.sample(200, a);
  const auto sb = buf.sample(200, b);
  EXPECT_EQ(sa, sb);
  std::vector<int> counts(4, 0);
  for (const ReplayItem* p : sa) ++counts[static_cast<int>(p->reward)];
  for (const int n : counts) EXPECT_GT(n, 20);
  ReplayBuffer empty(2);
  EXPECT_THROW(empty.sample(1, a), std::invalid_argument);
}

TEST(EpsSchedule, LinearThenFlat) {
  const EpsSchedule e{1.0, 0.1, 100};
  EXPECT_DOUBLE_EQ(e.at(0), 1.0);
  EXPECT_DOUBLE_EQ(e.at(50), 0.55);
  EXPECT_DOUBLE_EQ(e.at(100), 0.1);
  EXPECT_DOUBLE_EQ(e.at(1000), 0.1);
  EXPECT_DOUBLE_EQ((EpsSchedule{1.0, 0.2, 0}.at(0)), 0.2);
}

TEST(EpsilonGreedy, GreedyRespectsMaskAndTies) {
  Rng rng(1);
  const Vec q = (Vec(4) << 1.0, 5.0, 5.0, 9.0).finished();
  const std::vector<std::uint8_t> mask{1, 1, 1, 0};
  for (int i = 0; i < 20; ++i) EXPECT_EQ(epsilon_greedy(q, mask, 0.0, rng), 1);
  EXPECT_THROW(epsilon_greedy(q, std::vector<std::uint8_t>{0, 0, 0, 0}, 0.0, rng), std::invalid_argument);
  EXPECT_THROW(epsilon_greedy(q, std::vector<std::uint8_t>{1, 1}, 0.0, rng), std::invalid_argument);
}

TEST(EpsilonGreedy, FullExplorationIsUniformOverLegal) {
  Rng rng(2);
  const Vec q = Vec::Zero(4);
  const std::vector<std::uint8_t> mask{1, 0, 1, 1};
  std::vector<int> counts(4, 0);
  const int n = 9000;
  for (int i = 0; i < n; ++i) ++counts[epsilon_greedy(q, mask, 1.0, rng)];
  EXPECT_EQ(counts[1], 0);
  const double sd = std::sqrt(n * (1.0 / 3) * (2.0 / 3));
  for (const int a : {0, 2, 3}) EXPECT_NEAR(counts[a], n / 3.0, 4 * sd);
}

TEST(Tabular, UpdateFormula) {
  QTable t(3);
  t.set(2, 0, 1.0);
  t.set(2, 1, 4.0);
  tabular_update(t, 1, 2, 0.5, 2, false, 0.5, 0.9);
  EXPECT_DOUBLE_EQ(t.get(1, 2), 0.5 * (0.5 + 0.9 * 4.0));
  const std::vector<std::uint8_t> legal{1, 0, 1};
  tabular_update(t, 1, 0, 0.0, 2, false, 1.0, 0.9, legal);
  EXPECT_DOUBLE_EQ(t.get(1, 0), 0.9 * 1.0);
  tabular_update(t, 3, 0, 2.0, 2, true, 1.0, 0.9);
  EXPECT_DOUBLE_EQ(t.get(3, 0), 2.0);
  EXPECT_EQ(t.get(99, 1), 0.0);
}

TEST(Tabular, JointActionEncoding) {
  const ScenarioConfig c = small_scenario();
  TabularLearner learner(TeamSpec::victims(c), small_config());
  EXPECT_EQ(learner.num_joint_actions(), 49);
  for (int j = 0; j < 49; ++j) EXPECT_EQ(learner.joint_action(learner.split_joint_action(j)), j);
  const std::vector<int> parts{3, 1};
  EXPECT_EQ(learner.joint_action(parts), 3 + 7 * 1);
  const WorldState s = reset(c, 0);
  const auto mask = learner.joint_mask(s);
  for (int j = 0; j < 49; ++j) {
    const auto p = learner.split_joint_action(j);
    EXPECT_EQ(mask[j], TeamSpec::victims(c).mask(s, 0)[p[0]] && TeamSpec::victims(c).mask(s, 1)[p[1]]);
  }
}

TEST(Tabular, ObserveMatchesManualBackup) {
  const ScenarioConfig c = small_scenario();
  LearnerConfig lc = small_config();
  lc.tabular_alpha = 0.25;
  lc.reward_scale = 2.0;
  TabularLearner learner(TeamSpec::victims(c), lc);
  const auto items = random_items(learner.team(), 5, 9);
  QTable oracle(49);
  for (const ReplayItem& item : items) {
    const auto mask = item.done ? std::vector<std::uint8_t>{} : learner.joint_mask(item.next_state);
    tabular_update(oracle, state_id(item.state), learner.joint_action(item.actions), 2.0 * item.reward,
                   state_id(item.next_state), item.done, 0.25, 0.9, mask);
    learner.observe(item);
  }
  for (const ReplayItem& item : items) {
    const std::uint64_t id = state_id(item.state);
    for (int a = 0; a < 49; ++a) EXPECT_EQ(learner.table().get(id, a), oracle.get(id, a));
  }
}

TEST(Vdn, LossMatchesDirectComputation) {
  const ScenarioConfig c = small_scenario();
  LearnerConfig lc = small_config();
  lc.reward_scale = 0.5;
  ValueLearner learner(LearnerKind::vdn, TeamSpec::victims(c), lc, 3);
  const TeamSpec& team = learner.team();
  const auto items = random_items(team, 12, 4);
  double expected = 0.0;
  for (const ReplayItem& item : items) {
    double q_tot = 0.0, next_tot = 0.0;
    for (int i = 0; i < team.num_agents(); ++i) {
      if (item.state.units[team.units[i]].alive) q_tot += mlp_forward(learner.agent_net(), team.agent_input(item.state, i))(item.actions[i]);
      if (!item.done && item.next_state.units[team.units[i]].alive) {
        const Vec q = mlp_forward(learner.target_agent_net(), team.agent_input(item.next_state, i));
        const auto mask = team.mask(item.next_state, i);
        double best = -1e300;
        for (int a = 0; a < q.size(); ++a) if (mask[a]) best = std::max(best, q(a));
        next_tot += best;
      }
    }
    const double target = 0.5 * item.reward + (item.done ? 0.0 : 0.9 * next_tot);
    expected += (q_tot - target) * (q_tot - target);
  }
  expected /= items.size();
  EXPECT_NEAR(learner.loss_and_grads(pointers(items), nullptr), expected, 1e-10);
}

TEST(Vdn, GradientsMatchFiniteDifferences) {
  ValueLearner learner(LearnerKind::vdn, TeamSpec::victims(small_scenario()), small_config(), 5);
  const auto items = random_items(learner.team(), 10, 6);
  const auto batch = pointers(items);
  LearnerGrads grads;
  learner.loss_and_grads(batch, &grads);
  EXPECT_TRUE(grads.mixer.empty());
  check_net_gradient(learner, learner.agent_net(), grads.agent, batch);
}

TEST(QmixLite, GradientsMatchFiniteDifferences) {
  ValueLearner learner(LearnerKind::qmix_lite, TeamSpec::victims(small_scenario()), small_config(), 7);
  const auto items = random_items(learner.team(), 10, 8);
  const auto batch = pointers(items);
  LearnerGrads grads;
  learner.loss_and_grads(batch, &grads);
  ASSERT_EQ(grads.mixer.size(), 4u);
  check_net_gradient(learner, learner.agent_net(), grads.agent, batch);
  auto nets = learner.mixer().nets();
  for (std::size_t k = 0; k < nets.size(); ++k) check_net_gradient(learner, *nets[k], grads.mixer[k], batch);
}

TEST(QmixLite, MixerIsMonotoneInAgentValues) {
  const QmixMixer m = QmixMixer::create(6, 3, 4, 2);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Vec state(6), q(3);
    for (int i = 0; i < 6; ++i) state(i) = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 3; ++i) q(i) = rng.uniform(-5.0, 5.0);
    const double base = qmix_mix(m, q, state);
    for (int i = 0; i < 3; ++i) {
      Vec up = q;
      up(i) += rng.uniform(0.01, 2.0);
      EXPECT_GE(qmix_mix(m, up, state), base - 1e-12);
    }
  }
}

TEST(QmixLite, BatchMatchesSingle) {
  const QmixMixer m = QmixMixer::create(5, 2, 3, 4);
  Mat q(2, 3), s(5, 3);
  Rng rng(9);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal();
  const Vec batch = qmix_mix_batch(m, q, s);
  for (int b = 0; b < 3; ++b) EXPECT_NEAR(batch(b), qmix_mix(m, q.col(b), s.col(b)), 1e-12);
  EXPECT_THROW(qmix_mix(m, Vec::Zero(3), s.col(0)), std::invalid_argument);
}

TEST(ValueLearner, LearnStepReducesLossOnAFixedBatch) {
  for (const LearnerKind kind : {LearnerKind::vdn, LearnerKind::qmix_lite}) {
    LearnerConfig lc = small_config();
    lc.target_sync_every = 0;
    ValueLearner learner(kind, TeamSpec::victims(small_scenario()), lc, 11);
    const auto items = random_items(learner.team(), 16, 12);
    const auto batch = pointers(items);
    const double before = learner.loss_and_grads(batch, nullptr);
    for (int i = 0; i < 200; ++i) learner.learn_step(batch);
    EXPECT_LT(learner.loss_and_grads(batch, nullptr), 0.5 * before) << to_string(kind);
    EXPECT_EQ(learner.updates(), 200u);
  }
}

TEST(ValueLearner, TargetsSyncOnSchedule) {
  LearnerConfig lc = small_config();
  lc.target_sync_every = 3;
  ValueLearner learner(LearnerKind::qmix_lite, TeamSpec::victims(small_scenario()), lc, 13);
  const auto items = random_items(learner.team(), 8, 14);
  const auto batch = pointers(items);
  const MlpParams initial = learner.target_agent_net();
  learner.learn_step(batch);
  learner.learn_step(batch);
  EXPECT_EQ(learner.target_agent_net(), initial);
  EXPECT_NE(learner.agent_net(), initial);
  learner.learn_step(batch);
  EXPECT_EQ(learner.target_agent_net(), learner.agent_net());
  EXPECT_EQ(learner.target_mixer(), learner.mixer());
  EXPECT_NEAR(learner.loss_with_online_targets(batch), learner.loss_and_grads(batch, nullptr), 1e-12);
}

TEST(ValueLearner, DoubleQAgreesWithMaxWhenNetsMatch) {
  LearnerConfig lc = small_config();
  lc.target_sync_every = 0;
  LearnerConfig dq = lc;
  dq.double_q = true;
  ValueLearner plain(LearnerKind::vdn, TeamSpec::victims(small_scenario()), lc, 15);
  ValueLearner twin(LearnerKind::vdn, TeamSpec::victims(small_scenario()), dq, 15);
  const auto items = random_items(plain.team(), 16, 16);
  const auto batch = pointers(items);
  // Fresh learners start with target == online, so the chosen bootstrap action is the same.
  EXPECT_EQ(plain.loss_and_grads(batch, nullptr), twin.loss_and_grads(batch, nullptr));
  std::vector<double> plain_losses;
  std::vector<double> twin_losses;
  for (int i = 0; i < 20; ++i) {
    plain_losses.push_back(plain.learn_step(batch));
    twin_losses.push_back(twin.learn_step(batch));
  }
  EXPECT_EQ(plain_losses.front(), twin_losses.front());
  // Once the online net drifts from the target the bootstrap actions differ.
  EXPECT_NE(plain_losses.back(), twin_losses.back());
  EXPECT_NE(plain.agent_net(), twin.agent_net());
}

TEST(ValueLearner, ZeroLearningRateFreezesTheNets) {
  LearnerConfig lc = small_config();
  lc.target_sync_every = 0;
  ValueLearner learner(LearnerKind::qmix_lite, TeamSpec::victims(small_scenario()), lc, 17);
  const auto items = random_items(learner.team(), 8, 18);
  const auto batch = pointers(items);
  learner.set_learning_rate(0.0);
  const MlpParams agent = learner.agent_net();
  const QmixMixer mixer = learner.mixer();
  learner.learn_step(batch);
  EXPECT_EQ(learner.agent_net(), agent);
  EXPECT_EQ(learner.mixer(), mixer);
  EXPECT_THROW(learner.set_learning_rate(-1.0), std::invalid_argument);
}

TEST(ValueLearner, ObserveWaitsForLearningStarts) {
  LearnerConfig lc = small_config();
  lc.learning_starts = 10;
  lc.train_every = 2;
  ValueLearner learner(LearnerKind::vdn, TeamSpec::victims(small_scenario()), lc, 15);
  const auto items = random_items(learner.team(), 14, 16);
  std::vector<bool> learned;
  for (const ReplayItem& item : items) learned.push_back(learner.observe(item) >= 0.0);
  for (int i = 0; i < 14; ++i) EXPECT_EQ(learned[i], i + 1 >= 10 && (i + 1) % 2 == 0) << i;
  EXPECT_EQ(learner.updates(), 3u);
}

TEST(ValueLearner, DeadAgentsNoop) {
  const ScenarioConfig c = small_scenario();
  ValueLearner learner(LearnerKind::vdn, TeamSpec::victims(c), small_config(), 17);
  WorldState s = reset(c, 2);
  s.units[0].alive = false;
  s.units[0].health = 0;
  Rng rng(1);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(learner.act(s, 1.0, rng)[0], 0);
}

TEST(Checkpoint, RoundTripEveryKind) {
  const ScenarioConfig c = small_scenario(1);
  for (const LearnerKind kind : {LearnerKind::vdn, LearnerKind::qmix_lite, LearnerKind::tabular}) {
    const TeamSpec team = TeamSpec::traitors(c);
    auto learner = make_learner(kind, team, small_config(), 21);
    for (const ReplayItem& item : random_items(team, 20, 22)) learner->observe(item);
    std::stringstream first;
    learner->write(first, LearnerMeta{scenario_hash(c), 21, 20});
    const std::string text = first.str();
    std::stringstream in(text);
    const LoadedLearner loaded = read_learner(in, team, small_config());
    EXPECT_EQ(loaded.team, Team::traitor);
    EXPECT_EQ(loaded.meta.scenario_hash, scenario_hash(c));
    EXPECT_EQ(loaded.meta.steps, 20u);
    EXPECT_EQ(loaded.learner->kind(), kind);
    std::stringstream second;
    loaded.learner->write(second, loaded.meta);
    EXPECT_EQ(second.str(), text) << to_string(kind);
  }
}

TEST(Checkpoint, RejectsMismatchesWithLineNumbers) {
  const ScenarioConfig c = small_scenario();
  ValueLearner learner(LearnerKind::vdn, TeamSpec::victims(c), small_config(), 1);
  std::stringstream out;
  learner.write(out, LearnerMeta{});
  std::stringstream other(out.str());
  ScenarioConfig bigger = c;
  bigger.num_enemies = 3;
  EXPECT_THROW(read_learner(other, TeamSpec::victims(bigger), small_config()), std::invalid_argument);
  std::stringstream bad("LEARNER v1\nkind: vdn\nteam: nobody\n");
  try {
    read_learner(bad, TeamSpec::victims(c), small_config());
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(parse_learner_kind("dqn"), std::invalid_argument);
}

TEST(Evaluate, NoEnemiesIsAlwaysAWin) {
  ScenarioConfig c = small_scenario();
  c.num_enemies = 0;
  ValueLearner learner(LearnerKind::vdn, TeamSpec::victims(c), small_config(), 1);
  const EvalSummary e = evaluate_victims(learner, c, 5, 3, 0.9);
  EXPECT_EQ(e.win_rate, 1.0);
  EXPECT_EQ(e.allied_deaths, 0.0);
  EXPECT_EQ(e.episodes, 5);
  EXPECT_THROW(evaluate_victims(learner, small_scenario(), 5, 3, 0.9), std::invalid_argument);
  EXPECT_THROW(evaluate_victims(learner, c, 0, 3, 0.9), std::invalid_argument);
}

TEST(TrainVictims, DeterministicCurveAndCheckpoint) {
  const ScenarioConfig c = small_scenario(1);
  LearnerConfig lc = small_config();
  lc.eps.decay_steps = 200;
  const VictimTrainingOptions opts{100, 3};
  const VictimTrainingResult a = train_victims(c, LearnerKind::vdn, 300, 5, lc, opts);
  const VictimTrainingResult b = train_victims(c, LearnerKind::vdn, 300, 5, lc, opts);
  ASSERT_EQ(a.curve.size(), 3u);
  EXPECT_EQ(a.curve[0].step, 100u);
  EXPECT_EQ(a.curve[2].step, 300u);
  EXPECT_EQ(a.meta.scenario_hash, scenario_hash(without_traitors(c)));
  EXPECT_EQ(a.learner->team().num_agents(), 2);
  std::stringstream sa, sb;
  a.learner->write(sa, a.meta);
  b.learner->write(sb, b.meta);
  EXPECT_EQ(sa.str(), sb.str());
  for (std::size_t k = 0; k < a.curve.size(); ++k) EXPECT_EQ(a.curve[k].eval.mean_return, b.curve[k].eval.mean_return);
}

TEST(TrainVictims, TabularLearnsAnEasyFight) {
  // One victim next to one weak idle enemy: attacking at once wins.
  ScenarioConfig c;
  c.grid_width = 3;
  c.grid_height = 1;
  c.num_victims = 1;
  c.num_enemies = 1;
  c.max_health = 1;
  c.max_steps = 5;
  c.layout = SpawnLayout::explicit_coordinates;
  c.spawns = {{0, 0}, {1, 0}};
  c.enemy_behavior = EnemyBehavior::idle;
  LearnerConfig lc = small_config();
  lc.eps = EpsSchedule{1.0, 0.0, 200};
  lc.tabular_alpha = 0.5;
  const VictimTrainingResult r = train_victims(c, LearnerKind::tabular, 400, 1, lc, VictimTrainingOptions{0, 5});
  ASSERT_EQ(r.curve.size(), 1u);
  EXPECT_EQ(r.curve.back().eval.win_rate, 1.0);
}
