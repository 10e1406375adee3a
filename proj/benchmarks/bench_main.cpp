#include <benchmark/benchmark.h>

#include "traitor/harness.hpp"
#include "traitor/oracle.hpp"

using namespace traitor;

namespace {

ScenarioConfig default_scenario() {
  ScenarioConfig c;
  c.num_traitors = 2;
  return c;
}

void BM_MlpForwardBatch(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const MlpParams net = mlp_init({57, 64, 64, 13}, 1);
  const Mat x = Mat::Random(57, batch);
  for (auto _ : state) benchmark::DoNotOptimize(mlp_forward_batch(net, x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForwardBatch)->Arg(1)->Arg(32)->Arg(192);

void BM_MlpBackwardBatch(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const MlpParams net = mlp_init({57, 64, 64, 13}, 1);
  const Mat x = Mat::Random(57, batch);
  const Mat up = Mat::Random(13, batch);
  for (auto _ : state) {
    ForwardTape tape;
    mlp_forward_batch(net, x, &tape);
    GradBundle g = GradBundle::zeros_like(net);
    benchmark::DoNotOptimize(mlp_backward_batch(net, tape, up, g));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpBackwardBatch)->Arg(32)->Arg(192);

void BM_EnvStep(benchmark::State& state) {
  const ScenarioConfig c = default_scenario();
  Rng rng(1);
  WorldState s = reset(c, 1);
  for (auto _ : state) {
    std::vector<AgentAction> joint(c.num_units());
    for (int u = 0; u < c.first_enemy(); ++u) {
      if (!s.units[u].alive) continue;
      const auto legal = legal_actions(c, s, u);
      joint[u] = legal[rng.below(static_cast<int>(legal.size()))];
    }
    const auto enemy = scripted_enemy_policy(c, s);
    std::copy(enemy.begin(), enemy.end(), joint.begin() + c.first_enemy());
    StepOutcome out = step(c, s, joint);
    s = out.done ? reset(c, rng.next_u64()) : std::move(out.next_state);
  }
}
BENCHMARK(BM_EnvStep);

void BM_TmdpStep(benchmark::State& state) {
  const ScenarioConfig c = default_scenario();
  const TeamSpec team = TeamSpec::victims(c);
  auto victims = std::make_shared<VictimPolicy>(
      VictimPolicy::network(mlp_init({team.input_dim(), 64, 64, team.num_actions()}, 2)));
  const TmdpSpec spec = TmdpSpec::create(c, victims, 0.99);
  const TraitorPolicy traitors = random_policy(spec);
  Rng rng(3);
  WorldState s = reset(c, 1);
  for (auto _ : state) {
    TraitorTransition tr = tmdp_step(spec, s, traitors(s, rng), rng);
    s = tr.done ? reset(c, rng.next_u64()) : std::move(tr.next_state);
  }
}
BENCHMARK(BM_TmdpStep);

void BM_RndNoveltyAndUpdate(benchmark::State& state) {
  RndModule m = RndModule::create(12, 4);
  const Vec x = Vec::LinSpaced(12, 0.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(novelty(m, x));
    benchmark::DoNotOptimize(rnd_update(m, x));
  }
}
BENCHMARK(BM_RndNoveltyAndUpdate);

void BM_LearnStep(benchmark::State& state) {
  const auto kind = static_cast<LearnerKind>(state.range(0));
  const ScenarioConfig c = default_scenario();
  const TeamSpec team = TeamSpec::traitors(c);
  LearnerConfig lc;
  ValueLearner learner(kind, team, lc, 5);
  Rng rng(6);
  std::vector<ReplayItem> items;
  WorldState s = reset(c, 7);
  for (int i = 0; i < 64; ++i) {
    const std::vector<int> ids = learner.act(s, 1.0, rng);
    items.push_back({s, ids, rng.uniform(), s, i % 20 == 19});
  }
  std::vector<const ReplayItem*> batch;
  for (int i = 0; i < lc.batch_size; ++i) batch.push_back(&items[i]);
  for (auto _ : state) benchmark::DoNotOptimize(learner.learn_step(batch));
  state.SetLabel(to_string(kind));
}
BENCHMARK(BM_LearnStep)
    ->Arg(static_cast<int>(LearnerKind::vdn))
    ->Arg(static_cast<int>(LearnerKind::qmix_lite));

void BM_ValueIteration(benchmark::State& state) {
  Rng rng(8);
  RandomMdpOptions o;
  o.min_states = o.max_states = static_cast<int>(state.range(0));
  o.min_actions = o.max_actions = 5;
  const FiniteMdp m = random_mdp(rng, o);
  for (auto _ : state) benchmark::DoNotOptimize(value_iteration(m, 1e-10));
}
BENCHMARK(BM_ValueIteration)->Arg(20)->Arg(200);

}  // namespace
BENCHMARK_MAIN();
