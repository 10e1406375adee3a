#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "traitor/env.hpp"
#include "traitor/nnet.hpp"
#include "traitor/rng.hpp"

namespace traitor {

enum class LearnerKind { tabular, vdn, qmix_lite };

std::string to_string(LearnerKind kind);
LearnerKind parse_learner_kind(std::string_view name);

/// How the controlled units see the world.
enum class AgentView {
  victim_local,    // observe_without_traitors + agent one-hot
  traitor_full,    // observe (all units) + global_state + agent one-hot
};

/// The units a learner controls and the features each agent network receives.
struct TeamSpec {
  ScenarioConfig scenario;
  Team team = Team::victim;
  std::vector<int> units;
  AgentView view = AgentView::victim_local;

  static TeamSpec victims(const ScenarioConfig& scenario);
  static TeamSpec traitors(const ScenarioConfig& scenario);

  int num_agents() const { return static_cast<int>(units.size()); }
  int num_actions() const { return scenario.num_actions(team); }
  int input_dim() const;
  int state_dim() const { return global_state_size(scenario); }

  /// Features of agent `agent`; a dead agent gets zero features plus its one-hot.
  Vec agent_input(const WorldState& state, int agent) const;
  /// Legal-action mask; a dead agent may only noop.
  std::vector<std::uint8_t> mask(const WorldState& state, int agent) const;
};

struct ReplayItem {
  WorldState state;
  std::vector<int> actions;  // one action id per agent, 0 for dead agents
  double reward = 0.0;
  WorldState next_state;
  bool done = false;
};

/// Fixed-capacity ring buffer with uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(ReplayItem item);
  /// `count` items drawn uniformly with replacement.
  std::vector<const ReplayItem*> sample(std::size_t count, Rng& rng) const;

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t insertions() const { return insertions_; }
  const ReplayItem& at(std::size_t i) const { return items_.at(i); }

 private:
  std::size_t capacity_;
  std::vector<ReplayItem> items_;
  std::uint64_t insertions_ = 0;
};

/// Linear decay from start to end over decay_steps, then constant.
struct EpsSchedule {
  double eps_start = 1.0;
  double eps_end = 0.05;
  std::int64_t decay_steps = 50000;

  double at(std::int64_t step) const;
};

/// With probability eps a uniform legal action, otherwise the legal argmax
/// (ties to the lowest id). Always consumes exactly one uniform draw, plus one
/// more when exploring.
int epsilon_greedy(const Vec& q_values, std::span<const std::uint8_t> legal, double eps, Rng& rng);

/// Tabular action values; unseen entries read as 0.
class QTable {
 public:
  explicit QTable(int num_actions = 1) : num_actions_(num_actions) {}

  int num_actions() const { return num_actions_; }
  double get(std::uint64_t state, int action) const;
  void set(std::uint64_t state, int action, double value);
  /// Max over actions allowed by `legal` (all actions when empty).
  double max_value(std::uint64_t state, std::span<const std::uint8_t> legal = {}) const;
  const std::vector<double>* row(std::uint64_t state) const;
  std::size_t num_states() const { return table_.size(); }
  const std::unordered_map<std::uint64_t, std::vector<double>>& entries() const { return table_; }

 private:
  int num_actions_;
  std::unordered_map<std::uint64_t, std::vector<double>> table_;
};

/// One-step Q-learning backup. `next_legal` restricts the bootstrap max.
void tabular_update(QTable& table, std::uint64_t state, int action, double reward, std::uint64_t next_state,
                    bool done, double alpha, double gamma, std::span<const std::uint8_t> next_legal = {});

struct LearnerConfig {
  std::vector<int> hidden{64, 64};
  double lr = 1e-3;
  double lr_final = -1.0;       // < 0: constant lr; else linear anneal to this value over the run
  double gamma = 0.99;
  int batch_size = 32;
  int replay_capacity = 50000;
  EpsSchedule eps{};
  int target_sync_every = 200;  // in learning updates
  int train_every = 1;          // env steps per learning update
  int learning_starts = 1000;   // minimum stored transitions before learning
  double reward_scale = 1.0;    // applied to rewards inside the TD target
  double grad_clip = 10.0;      // global L2 norm; <= 0 disables
  bool double_q = false;        // online net picks the bootstrap action, target net scores it
  int mixer_embed = 32;
  double tabular_alpha = 0.5;
};

struct LearnerMeta {
  std::uint64_t scenario_hash = 0;
  std::uint64_t seed = 0;
  std::uint64_t steps = 0;
};

/// Common surface of every learner a training loop drives.
class TeamLearner {
 public:
  virtual ~TeamLearner() = default;

  virtual LearnerKind kind() const = 0;
  const TeamSpec& team() const { return team_; }
  const LearnerConfig& config() const { return config_; }

  /// One action id per agent (0 for dead agents).
  virtual std::vector<int> act(const WorldState& state, double eps, Rng& rng) const = 0;
  /// Stores a transition and runs whatever learning is scheduled. Returns the
  /// last loss, or a negative value when no update ran.
  virtual double observe(ReplayItem item) = 0;
  /// Optimizer step size for subsequent updates; learners without one ignore it.
  virtual void set_learning_rate(double) {}

  virtual void write(std::ostream& out, const LearnerMeta& meta) const = 0;

 protected:
  TeamLearner(TeamSpec team, LearnerConfig config) : team_(std::move(team)), config_(std::move(config)) {}

  TeamSpec team_;
  LearnerConfig config_;
};

/// Gradients of a learning step, shape-matched to the learner's online nets.
struct LearnerGrads {
  GradBundle agent;
  std::vector<GradBundle> mixer;  // hyper_w1, hyper_b1, hyper_w2, hyper_b2
};

/// Hypernetwork-conditioned monotonic mixer:
/// Q_tot = |w2(s)| . elu(|W1(s)| q + b1(s)) + b2(s).
struct QmixMixer {
  MlpParams hyper_w1;  // state -> embed * agents
  MlpParams hyper_b1;  // state -> embed
  MlpParams hyper_w2;  // state -> embed
  MlpParams hyper_b2;  // state -> embed -> 1

  static QmixMixer create(int state_dim, int num_agents, int embed, std::uint64_t seed);
  int num_agents() const;
  int embed() const { return hyper_b1.output_dim(); }
  std::vector<MlpParams*> nets() { return {&hyper_w1, &hyper_b1, &hyper_w2, &hyper_b2}; }
  std::vector<const MlpParams*> nets() const { return {&hyper_w1, &hyper_b1, &hyper_w2, &hyper_b2}; }

  friend bool operator==(const QmixMixer&, const QmixMixer&) = default;
};

double qmix_mix(const QmixMixer& mixer, const Vec& agent_qs, const Vec& state);

/// Intermediate values of a batched mixer pass, kept for the backward pass.
struct MixerTape {
  ForwardTape w1, b1, w2, b2;
  Mat w1_raw;   // (embed * agents) x batch, before the absolute value
  Mat w2_raw;   // embed x batch
  Mat pre;      // embed x batch, hidden pre-activation
  Mat hidden;   // elu(pre)
  Mat agent_qs; // agents x batch
};

/// Batched mixer forward pass; columns are samples. `tape` is filled when given.
Vec qmix_mix_batch(const QmixMixer& mixer, const Mat& agent_qs, const Mat& states, MixerTape* tape = nullptr);

/// Backward pass of qmix_mix_batch for upstream dL/dQ_tot per sample.
/// Accumulates hypernetwork gradients (in nets() order) and returns dL/dq (agents x batch).
Mat qmix_mix_backward(const QmixMixer& mixer, const MixerTape& tape, const Vec& upstream,
                      std::span<GradBundle> grads);

/// VDN or QMIX-lite learner with a parameter-shared agent network, replay and
/// periodically synced target networks.
class ValueLearner final : public TeamLearner {
 public:
  ValueLearner(LearnerKind kind, TeamSpec team, LearnerConfig config, std::uint64_t seed);

  LearnerKind kind() const override { return kind_; }
  std::vector<int> act(const WorldState& state, double eps, Rng& rng) const override;
  double observe(ReplayItem item) override;
  void set_learning_rate(double lr) override;
  void write(std::ostream& out, const LearnerMeta& meta) const override;

  /// Q values of one agent input under the online network.
  Vec agent_q(const Vec& input) const { return mlp_forward(agent_net_, input); }

  /// TD loss of a batch and its gradients w.r.t. the online parameters
  /// (targets held fixed). No clipping.
  double loss_and_grads(std::span<const ReplayItem* const> batch, LearnerGrads* grads) const;
  /// Loss evaluated with the online networks standing in for the targets.
  double loss_with_online_targets(std::span<const ReplayItem* const> batch) const;
  /// One optimizer step on a batch; returns the pre-update loss.
  double learn_step(std::span<const ReplayItem* const> batch);
  void sync_targets();

  /// Team value of the given per-agent chosen Q values.
  double mix(const Vec& agent_qs, const Vec& state) const;

  MlpParams& agent_net() { return agent_net_; }
  const MlpParams& agent_net() const { return agent_net_; }
  const MlpParams& target_agent_net() const { return target_agent_net_; }
  QmixMixer& mixer() { return mixer_; }
  const QmixMixer& mixer() const { return mixer_; }
  const QmixMixer& target_mixer() const { return target_mixer_; }
  const ReplayBuffer& replay() const { return replay_; }
  std::uint64_t updates() const { return updates_; }
  std::uint64_t observed() const { return observed_; }

  /// Restores online/target parameters (used when loading checkpoints).
  void set_networks(MlpParams agent, QmixMixer mixer);

 private:
  double loss_impl(std::span<const ReplayItem* const> batch, const MlpParams& target_agent,
                   const QmixMixer& target_mixer, LearnerGrads* grads) const;

  LearnerKind kind_;
  MlpParams agent_net_;
  MlpParams target_agent_net_;
  QmixMixer mixer_;
  QmixMixer target_mixer_;
  OptState agent_opt_;
  std::vector<OptState> mixer_opt_;
  ReplayBuffer replay_;
  Rng sample_rng_;
  std::uint64_t updates_ = 0;
  std::uint64_t observed_ = 0;
};

/// Joint-action tabular Q-learning over exact world-state ids.
class TabularLearner final : public TeamLearner {
 public:
  TabularLearner(TeamSpec team, LearnerConfig config);

  LearnerKind kind() const override { return LearnerKind::tabular; }
  std::vector<int> act(const WorldState& state, double eps, Rng& rng) const override;
  double observe(ReplayItem item) override;
  void write(std::ostream& out, const LearnerMeta& meta) const override;

  int num_joint_actions() const { return table_.num_actions(); }
  int joint_action(std::span<const int> actions) const;
  std::vector<int> split_joint_action(int joint) const;
  /// Joint legal mask; dead agents contribute only noop.
  std::vector<std::uint8_t> joint_mask(const WorldState& state) const;

  QTable& table() { return table_; }
  const QTable& table() const { return table_; }

 private:
  QTable table_;
};

std::unique_ptr<TeamLearner> make_learner(LearnerKind kind, const TeamSpec& team, const LearnerConfig& config,
                                          std::uint64_t seed);

struct LoadedLearner {
  std::unique_ptr<TeamLearner> learner;
  LearnerMeta meta;
  Team team = Team::victim;
};

/// Checkpoint layout:
///   LEARNER v1
///   kind: <tabular|vdn|qmix_lite>
///   team: <victim|traitor>
///   scenario_hash: <u64>
///   seed: <u64>
///   steps: <u64>
///   nets: <count>             (network learners, followed by NNET blocks:
///                              agent, then hyper_w1, hyper_b1, hyper_w2, hyper_b2)
///   table: <rows>             (tabular learners, followed by `id q0 q1 ...` rows)
LoadedLearner read_learner(std::istream& in, const TeamSpec& team, const LearnerConfig& config);

struct EvalSummary {
  int episodes = 0;
  double win_rate = 0.0;
  double allied_deaths = 0.0;  // victims and traitors
  double mean_return = 0.0;    // discounted victim-team return
};

/// Greedy evaluation of a victim learner in a traitor-free scenario.
EvalSummary evaluate_victims(const TeamLearner& learner, const ScenarioConfig& scenario, int episodes,
                             std::uint64_t seed, double gamma);

struct VictimTrainingPoint {
  std::uint64_t step = 0;
  EvalSummary eval;
};

struct VictimTrainingResult {
  std::unique_ptr<TeamLearner> learner;
  std::vector<VictimTrainingPoint> curve;  // includes a final point at total_steps
  LearnerMeta meta;
};

struct VictimTrainingOptions {
  int eval_every = 5000;
  int eval_episodes = 200;
};

/// Episodic epsilon-greedy training of the victim team against the scripted
/// enemies in the traitor-free variant of `scenario`.
VictimTrainingResult train_victims(const ScenarioConfig& scenario, LearnerKind kind, std::uint64_t total_steps,
                                   std::uint64_t seed, const LearnerConfig& config,
                                   const VictimTrainingOptions& options = {});

}  // namespace traitor
