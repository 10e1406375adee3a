#include "traitor/tmdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "traitor/errors.hpp"

namespace traitor {

VictimPolicy VictimPolicy::network(MlpParams agent_net, VictimSelection selection) {
  VictimPolicy p;
  p.kind_ = Kind::network;
  p.selection_ = selection;
  p.agent_net_ = std::move(agent_net);
  return p;
}

VictimPolicy VictimPolicy::uniform() {
  VictimPolicy p;
  p.kind_ = Kind::uniform;
  return p;
}

VictimPolicy VictimPolicy::noop() { return VictimPolicy{}; }

std::vector<double> VictimPolicy::distribution(const TeamSpec& victims, const WorldState& state, int agent) const {
  const int actions = victims.num_actions();
  std::vector<double> dist(actions, 0.0);
  const auto mask = victims.mask(state, agent);
  if (!state.units[victims.units.at(agent)].alive || kind_ == Kind::noop) {
    dist[0] = 1.0;
    return dist;
  }
  if (kind_ == Kind::uniform) {
    const double legal = static_cast<double>(std::count(mask.begin(), mask.end(), 1));
    for (int a = 0; a < actions; ++a) dist[a] = mask[a] ? 1.0 / legal : 0.0;
    return dist;
  }
  if (agent_net_.input_dim() != victims.input_dim() || agent_net_.output_dim() != actions) {
    throw std::invalid_argument("victim policy network does not match the scenario");
  }
  const Vec q = mlp_forward(agent_net_, victims.agent_input(state, agent));
  if (selection_ == VictimSelection::greedy) {
    int best = -1;
    for (int a = 0; a < actions; ++a) {
      if (mask[a] && (best < 0 || q(a) > q(best))) best = a;
    }
    dist[best] = 1.0;
    return dist;
  }
  // Boltzmann distribution over legal actions at temperature 1.
  double top = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < actions; ++a) {
    if (mask[a]) top = std::max(top, q(a));
  }
  double total = 0.0;
  for (int a = 0; a < actions; ++a) {
    if (!mask[a]) continue;
    dist[a] = std::exp(q(a) - top);
    total += dist[a];
  }
  for (double& p : dist) p /= total;
  return dist;
}

VictimPolicy load_victim_policy(std::istream& in, const ScenarioConfig& scenario, VictimSelection selection) {
  const ScenarioConfig base = without_traitors(scenario);
  LoadedLearner loaded = read_learner(in, TeamSpec::victims(base), LearnerConfig{});
  if (loaded.team != Team::victim) throw std::invalid_argument("checkpoint does not hold a victim learner");
  if (loaded.meta.scenario_hash != scenario_hash(base)) {
    throw std::invalid_argument("victim checkpoint was trained on a different scenario");
  }
  const auto* value = dynamic_cast<const ValueLearner*>(loaded.learner.get());
  if (value == nullptr) throw std::invalid_argument("tabular victim checkpoints cannot drive a traitor scenario");
  return VictimPolicy::network(value->agent_net(), selection);
}

VictimPolicy load_victim_policy(const std::string& path, const ScenarioConfig& scenario, VictimSelection selection) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open victim checkpoint '" + path + "'");
  return load_victim_policy(in, scenario, selection);
}

TmdpSpec TmdpSpec::create(const ScenarioConfig& scenario, std::shared_ptr<const VictimPolicy> policy, double gamma) {
  validate(scenario);
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("TmdpSpec: gamma must lie in [0, 1)");
  TmdpSpec spec;
  spec.scenario = scenario;
  spec.victim_policy = std::move(policy);
  spec.gamma = gamma;
  for (int i = scenario.first_traitor(); i < scenario.first_enemy(); ++i) spec.traitor_indices.push_back(i);
  return spec;
}

namespace {

int sample_from(const std::vector<double>& dist, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = 0;
  for (std::size_t a = 0; a < dist.size(); ++a) {
    if (dist[a] <= 0.0) continue;
    acc += dist[a];
    last = static_cast<int>(a);
    if (u < acc) return last;
  }
  return last;
}

bool is_point_mass(const std::vector<double>& dist, int& action) {
  for (std::size_t a = 0; a < dist.size(); ++a) {
    if (dist[a] == 1.0) {
      action = static_cast<int>(a);
      return true;
    }
  }
  return false;
}

}  // namespace

std::vector<AgentAction> victim_actions(const TmdpSpec& spec, const WorldState& state, Rng& rng) {
  if (!spec.victim_policy) throw StateError("victim_actions: no victim policy loaded");
  const ScenarioConfig& c = spec.scenario;
  const TeamSpec victims = spec.victim_team();
  std::vector<AgentAction> actions(c.num_victims, AgentAction::noop());
  const VictimPolicy& policy = *spec.victim_policy;
  // Batched forward pass for greedy network victims; the common case in training loops.
  if (policy.kind() == VictimPolicy::Kind::network && policy.selection() == VictimSelection::greedy) {
    std::vector<int> alive;
    for (int v = 0; v < c.num_victims; ++v) {
      if (state.units[v].alive) alive.push_back(v);
    }
    if (alive.empty()) return actions;
    Mat inputs(victims.input_dim(), static_cast<Eigen::Index>(alive.size()));
    for (std::size_t k = 0; k < alive.size(); ++k) inputs.col(k) = victims.agent_input(state, alive[k]);
    const Mat q = mlp_forward_batch(policy.agent_net(), inputs);
    for (std::size_t k = 0; k < alive.size(); ++k) {
      const auto mask = victims.mask(state, alive[k]);
      int best = -1;
      for (int a = 0; a < victims.num_actions(); ++a) {
        if (mask[a] && (best < 0 || q(a, k) > q(best, k))) best = a;
      }
      actions[alive[k]] = action_from_id(c, Team::victim, best);
    }
    return actions;
  }
  for (int v = 0; v < c.num_victims; ++v) {
    if (!state.units[v].alive) continue;
    const auto dist = policy.distribution(victims, state, v);
    int id = 0;
    if (!is_point_mass(dist, id)) id = sample_from(dist, rng);
    actions[v] = action_from_id(c, Team::victim, id);
  }
  return actions;
}

TraitorTransition tmdp_step(const TmdpSpec& spec, const WorldState& state, std::span<const int> traitor_actions,
                            Rng& rng) {
  const ScenarioConfig& c = spec.scenario;
  if (traitor_actions.size() != spec.traitor_indices.size()) {
    throw std::invalid_argument("tmdp_step: need one action per traitor");
  }
  std::vector<AgentAction> joint = victim_actions(spec, state, rng);
  joint.resize(c.num_units(), AgentAction::noop());
  for (std::size_t k = 0; k < spec.traitor_indices.size(); ++k) {
    const int unit = spec.traitor_indices[k];
    const int id = traitor_actions[k];
    if (!state.units[unit].alive) {
      if (id != 0) throw std::invalid_argument("tmdp_step: dead traitor must noop");
      continue;
    }
    const auto mask = legal_mask(c, state, unit);
    if (id < 0 || id >= static_cast<int>(mask.size()) || !mask[id]) {
      throw std::invalid_argument("tmdp_step: illegal traitor action");
    }
    joint[unit] = action_from_id(c, Team::traitor, id);
  }
  const auto enemy = scripted_enemy_policy(c, state);
  std::copy(enemy.begin(), enemy.end(), joint.begin() + c.first_enemy());
  StepOutcome out = step(c, state, joint);

  TraitorTransition tr;
  tr.joint_actions = std::move(joint);
  tr.state = state;
  tr.traitor_actions.assign(traitor_actions.begin(), traitor_actions.end());
  tr.next_state = std::move(out.next_state);
  tr.r_victim = out.reward;
  tr.r_traitor = -out.reward;
  tr.done = out.done;
  tr.won = out.won;
  tr.t = state.t;
  return tr;
}

TraitorPolicy stop_policy(const TmdpSpec& spec) {
  const std::size_t n = spec.traitor_indices.size();
  return [n](const WorldState&, Rng&) { return std::vector<int>(n, 0); };
}

TraitorPolicy random_policy(const TmdpSpec& spec) {
  const ScenarioConfig c = spec.scenario;
  const std::vector<int> units = spec.traitor_indices;
  return [c, units](const WorldState& state, Rng& rng) {
    std::vector<int> ids(units.size(), 0);
    for (std::size_t k = 0; k < units.size(); ++k) {
      if (!state.units[units[k]].alive) continue;
      const auto mask = legal_mask(c, state, units[k]);
      std::vector<int> legal;
      for (std::size_t a = 0; a < mask.size(); ++a) {
        if (mask[a]) legal.push_back(static_cast<int>(a));
      }
      ids[k] = legal[rng.below(static_cast<int>(legal.size()))];
    }
    return ids;
  };
}

TraitorPolicy learner_policy(const TeamLearner& learner) {
  return [&learner](const WorldState& state, Rng& rng) { return learner.act(state, 0.0, rng); };
}

ObjectiveEstimate traitor_objective_estimate(const TmdpSpec& spec, const TraitorPolicy& policy, int episodes,
                                             std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("traitor_objective_estimate: episodes must be positive");
  Rng rng(derive_seed(seed, 2));
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    WorldState s = reset(spec.scenario, derive_seed(seed, 1000 + static_cast<std::uint64_t>(ep)));
    double ret = 0.0;
    double discount = 1.0;
    while (true) {
      const auto ids = policy(s, rng);
      TraitorTransition tr = tmdp_step(spec, s, ids, rng);
      ret += discount * tr.r_traitor;
      discount *= spec.gamma;
      if (tr.done) break;
      s = std::move(tr.next_state);
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  ObjectiveEstimate est;
  est.episodes = episodes;
  est.mean = sum / episodes;
  if (episodes > 1) {
    const double var = std::max(0.0, (sum_sq - episodes * est.mean * est.mean) / (episodes - 1));
    est.std_error = std::sqrt(var / episodes);
  }
  return est;
}

}  // namespace traitor
