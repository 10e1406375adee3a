#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "traitor/env.hpp"
#include "traitor/nnet.hpp"
#include "traitor/tmdp.hpp"

namespace traitor {

struct RndConfig {
  std::vector<int> hidden{128, 128};
  int output_dim = 64;
  double lr = 1e-3;
  /// Append traitor coordinates to the trimmed input (ablation switch).
  bool include_traitors = false;
};

/// Random network distillation: a frozen random target and a trainable predictor.
struct RndModule {
  MlpParams target;
  MlpParams predictor;
  OptState opt;
  int input_width = 0;
  bool include_traitors = false;
  std::uint64_t seed = 0;
  std::uint64_t episodes = 0;  // pre-training episodes behind the predictor

  static RndModule create(int input_width, std::uint64_t seed, const RndConfig& config = {});
};

/// Input width of trim_state for a scenario.
int trimmed_width(const ScenarioConfig& config, bool include_traitors = false);

/// Normalized (x, y) of each victim in index order, divided by (W-1, H-1).
/// Dead victims keep their last position. Traitors follow when requested.
Vec trim_state(const ScenarioConfig& config, const WorldState& state, bool include_traitors = false);

/// Squared distance between predictor and target outputs.
double novelty(const RndModule& module, const Vec& trimmed);

/// One optimizer step on the predictor's MSE to the target for `trimmed`.
/// Returns the pre-update loss.
double rnd_update(RndModule& module, const Vec& trimmed);

/// Rolls out episodes with uniformly random traitors and the frozen victims,
/// updating the predictor on every visited state (including the reset state).
RndModule pretrain_rnd(const TmdpSpec& spec, int episodes, std::uint64_t seed, const RndConfig& config = {});

/// `RND v1 input_width=<n> episodes=<n> seed=<n> include_traitors=<0|1>` followed
/// by the target and predictor NNET blocks. Optimizer moments are not stored.
void write_rnd(std::ostream& out, const RndModule& module);
RndModule read_rnd(std::istream& in, const RndConfig& config = {});

}  // namespace traitor
