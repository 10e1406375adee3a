#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "traitor/env.hpp"
#include "traitor/learners.hpp"
#include "traitor/nnet.hpp"
#include "traitor/rng.hpp"

namespace traitor {

/// How a network victim policy turns Q values into actions.
enum class VictimSelection { greedy, sample };

/// Frozen victim policy. Network policies share one agent network across
/// victims (input: observe_without_traitors + one-hot); `uniform` and `noop`
/// are scripted stand-ins used by oracle scenarios.
class VictimPolicy {
 public:
  enum class Kind { network, uniform, noop };

  static VictimPolicy network(MlpParams agent_net, VictimSelection selection = VictimSelection::greedy);
  static VictimPolicy uniform();
  static VictimPolicy noop();

  Kind kind() const { return kind_; }
  VictimSelection selection() const { return selection_; }
  const MlpParams& agent_net() const { return agent_net_; }

  /// Action-id distribution of victim `agent` (index into the victim roster).
  /// Dead victims get a point mass on noop.
  std::vector<double> distribution(const TeamSpec& victims, const WorldState& state, int agent) const;

 private:
  Kind kind_ = Kind::noop;
  VictimSelection selection_ = VictimSelection::greedy;
  MlpParams agent_net_;
};

/// Reads a victim learner checkpoint trained on without_traitors(scenario).
/// Throws std::invalid_argument on a scenario mismatch or a tabular checkpoint.
VictimPolicy load_victim_policy(std::istream& in, const ScenarioConfig& scenario,
                                VictimSelection selection = VictimSelection::greedy);
VictimPolicy load_victim_policy(const std::string& path, const ScenarioConfig& scenario,
                                VictimSelection selection = VictimSelection::greedy);

/// The traitor-side decision process: environment, frozen victims, traitor roster.
struct TmdpSpec {
  ScenarioConfig scenario;
  std::shared_ptr<const VictimPolicy> victim_policy;
  std::vector<int> traitor_indices;
  double gamma = 0.99;

  static TmdpSpec create(const ScenarioConfig& scenario, std::shared_ptr<const VictimPolicy> policy,
                         double gamma);

  TeamSpec victim_team() const { return TeamSpec::victims(scenario); }
  TeamSpec traitor_team() const { return TeamSpec::traitors(scenario); }
};

/// Per-victim actions from the frozen policy; dead victims get noop.
/// Greedy selection never touches `rng`. Throws StateError without a policy.
std::vector<AgentAction> victim_actions(const TmdpSpec& spec, const WorldState& state, Rng& rng);

struct TraitorTransition {
  WorldState state;
  std::vector<int> traitor_actions;  // action ids, one per traitor
  std::vector<AgentAction> joint_actions;  // every unit, as applied
  WorldState next_state;
  double r_victim = 0.0;
  double r_traitor = 0.0;  // always -r_victim
  bool done = false;
  bool won = false;  // victims won
  int t = 0;         // timestep of `state`
};

/// One environment step with victims, the given traitor action ids and
/// scripted enemies. Throws std::invalid_argument on an illegal traitor action.
TraitorTransition tmdp_step(const TmdpSpec& spec, const WorldState& state, std::span<const int> traitor_actions,
                            Rng& rng);

/// Traitor action ids for a state.
using TraitorPolicy = std::function<std::vector<int>(const WorldState&, Rng&)>;

TraitorPolicy stop_policy(const TmdpSpec& spec);
TraitorPolicy random_policy(const TmdpSpec& spec);
/// Greedy actions of a trained traitor learner.
TraitorPolicy learner_policy(const TeamLearner& learner);

struct ObjectiveEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int episodes = 0;
};

/// Monte-Carlo estimate of the traitors' expected discounted return.
/// Episode k resets with derive_seed(seed, k).
ObjectiveEstimate traitor_objective_estimate(const TmdpSpec& spec, const TraitorPolicy& policy, int episodes,
                                             std::uint64_t seed);

}  // namespace traitor
