#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "traitor/env.hpp"
#include "traitor/learners.hpp"
#include "traitor/rnd.hpp"
#include "traitor/shaping.hpp"
#include "traitor/tmdp.hpp"

namespace traitor {

enum class AttackMethod { stop, random, minus_r, rnd_only, cuda2 };

std::string to_string(AttackMethod method);
AttackMethod parse_attack_method(std::string_view name);
bool is_learned(AttackMethod method);

/// When the potential of s' is read relative to the step's RND update.
enum class PotentialTiming {
  strict,  // after the update (predictor at t+1)
  frozen,  // before the update (predictor at t)
};

/// Which potential the cuda2 method shapes with.
enum class PotentialSource { rnd, zero };

struct RunConfig {
  ScenarioConfig scenario;
  std::string scenario_path;
  AttackMethod method = AttackMethod::cuda2;
  LearnerKind victim_learner = LearnerKind::vdn;
  LearnerKind traitor_learner = LearnerKind::vdn;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::uint64_t victim_seed = 1;
  std::uint64_t victim_steps = 200000;
  int victim_eval_every = 5000;
  int rnd_episodes = 200;
  int traitor_episodes = 2000;
  int traitor_eval_every = 5000;  // traitor env steps between metrics rows; 0 = final row only
  int eval_episodes = 200;
  double gamma = 0.99;
  LearnerConfig victim_config;
  LearnerConfig traitor_config;
  RndConfig rnd;
  double rnd_scale = 1.0;
  PotentialTiming timing = PotentialTiming::strict;
  PotentialSource potential = PotentialSource::rnd;
  VictimSelection victim_selection = VictimSelection::greedy;
  std::string victim_checkpoint;  // empty: <out>/victims.ckpt
  std::string rnd_checkpoint;     // empty: <out>/rnd.ckpt
  std::string out_dir = ".";

  std::string victim_checkpoint_path() const;
  std::string rnd_checkpoint_path() const;
};

/// `key = value` run file. Relative paths resolve against `base_dir`.
/// Learner keys (lr, batch_size, ...) apply to both teams; a `victim.` or
/// `traitor.` prefix overrides one team. Unknown keys are rejected.
RunConfig parse_run_config(std::istream& in, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);
/// Canonical text of every setting, for provenance files.
std::string write_run_config(const RunConfig& config);

struct MetricsRow {
  std::string method;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  double win_rate = 0.0;
  double allied_deaths = 0.0;  // victims and traitors
  double traitor_return = 0.0;
  double shaping_residual_max = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "method,seed,step,win_rate,allied_deaths,traitor_return,shaping_residual_max";

void write_metrics_row(std::ostream& out, const MetricsRow& row);

/// Appends `# replay v1 seed=<reset seed> units=<n>`, a column header and one
/// `t,actions,reward,done` row per step; actions are `;`-separated tokens.
class ReplayLogWriter {
 public:
  explicit ReplayLogWriter(std::ostream& out) : out_(out) {}
  void begin_episode(std::uint64_t reset_seed, int units);
  void log_step(int t, std::span<const AgentAction> actions, double reward, bool done);

 private:
  std::ostream& out_;
};

struct LoggedEpisode {
  std::uint64_t reset_seed = 0;
  int units = 0;
  std::vector<std::vector<AgentAction>> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;
};

/// Throws ParseError with the offending line number.
std::vector<LoggedEpisode> read_replay_log(std::istream& in);

struct EvalResult {
  int episodes = 0;
  double win_rate = 0.0;
  double allied_deaths = 0.0;
  double traitor_return = 0.0;  // discounted, unshaped
};

/// Greedy evaluation; episode k resets with derive_seed(seed, 100 + k), the
/// same protocol evaluate_victims uses.
EvalResult evaluate_attack(const TmdpSpec& spec, const TraitorPolicy& traitors, int episodes, std::uint64_t seed,
                           ReplayLogWriter* log = nullptr);

struct EpisodeResidual {
  std::uint64_t episode = 0;
  int steps = 0;
  double U = 0.0;
  double U_F = 0.0;
  double residual = 0.0;
};

struct TraitorTrainingResult {
  std::vector<MetricsRow> metrics;
  std::vector<EpisodeResidual> residuals;
  std::unique_ptr<TeamLearner> learner;  // null for stop and random
  std::uint64_t steps = 0;
  LearnerMeta meta;
};

/// Traitor training (or scripted baselines) for one seed. `rnd` is required by
/// cuda2 with the RND potential and by rnd_only; it is copied, never mutated.
TraitorTrainingResult train_traitors(const RunConfig& config, const TmdpSpec& spec, const RndModule* rnd,
                                     std::uint64_t seed);

struct HeatmapGrid {
  int width = 0;
  int height = 0;
  std::string team;
  std::vector<std::uint64_t> counts;  // row-major, y * width + x

  std::uint64_t total() const;
  std::uint64_t at(int x, int y) const { return counts[static_cast<std::size_t>(y) * width + x]; }
};

/// Replays each logged episode from its reset seed and counts the pre-step
/// cell of every alive victim and traitor.
std::pair<HeatmapGrid, HeatmapGrid> build_heatmaps(const ScenarioConfig& scenario,
                                                   std::span<const LoggedEpisode> episodes);
void write_heatmap(std::ostream& out, const HeatmapGrid& grid);
HeatmapGrid read_heatmap(std::istream& in);

struct VerifyResult {
  std::string name;
  bool passed = false;
  bool expected_failure = false;  // a demonstrated failure that is the point of the check
  std::string detail;
};

/// Suites: invariance, counterexample, gradients, telescoping, all.
std::vector<VerifyResult> run_verify_suite(const std::string& suite, std::uint64_t seed);

}  // namespace traitor
