#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "traitor/nnet.hpp"
#include "traitor/rnd.hpp"
#include "traitor/tmdp.hpp"

namespace traitor {

/// What a potential looks at: an exact state id for tables, a feature vector
/// (the trimmed state) for RND potentials.
struct StateRef {
  std::uint64_t id = 0;
  Vec features;
};

StateRef make_state_ref(const ScenarioConfig& config, const WorldState& state, bool include_traitors = false);

/// Potential function over states, or over state-action pairs for advice shaping.
class PotentialHandle {
 public:
  enum class Kind { tabular, rnd, constant };

  static PotentialHandle constant(double value, bool time_indexed = false);
  static PotentialHandle tabular(std::unordered_map<std::uint64_t, double> values, bool time_indexed = false);
  static PotentialHandle state_action(std::map<std::pair<std::uint64_t, int>, double> values);
  /// Live view of `module`: scale * novelty. The module must outlive the handle;
  /// values drift as the predictor trains, so the handle is time-indexed.
  static PotentialHandle rnd(const RndModule& module, double scale = 1.0);

  Kind kind() const { return kind_; }
  bool time_indexed() const { return time_indexed_; }
  bool over_actions() const { return !state_action_.empty(); }

  /// Throws std::invalid_argument for a missing table entry.
  double operator()(const StateRef& state) const;
  double operator()(const StateRef& state, int action) const;

 private:
  Kind kind_ = Kind::constant;
  bool time_indexed_ = false;
  double value_ = 0.0;
  double scale_ = 1.0;
  const RndModule* module_ = nullptr;
  std::unordered_map<std::uint64_t, double> table_;
  std::map<std::pair<std::uint64_t, int>, double> state_action_;
};

/// F = gamma * phi(s') - phi(s); phi must not be time-indexed.
double static_pbrs(const PotentialHandle& phi, const StateRef& s, const StateRef& s_next, double gamma);

/// F = gamma * phi(s', a') - phi(s, a).
double advice_pbrs(const PotentialHandle& phi, const StateRef& s, int a, const StateRef& s_next, int a_next,
                   double gamma);

struct DynamicShaping {
  double F = 0.0;
  double phi_s = 0.0;
  double phi_s_next = 0.0;
};

/// Time-indexed shaping with the terminal-zero rule: phi_s_next = 0 when s' is terminal.
DynamicShaping dynamic_pbrs(const PotentialHandle& phi, const StateRef& s, int t, const StateRef& s_next, int t_next,
                            double gamma, bool s_next_terminal);

struct ShapedTransition {
  TraitorTransition base;
  double phi_s = 0.0;
  double phi_s_next = 0.0;  // 0 on terminal transitions
  double F = 0.0;
  double r_shaped = 0.0;
};

/// Composes a transition with logged potential values. phi_s_next is forced
/// to 0 when the transition is terminal.
ShapedTransition shape_with_potentials(TraitorTransition transition, double phi_s, double phi_s_next, double gamma);

/// Evaluates both potentials now and shapes. `include_traitors` selects the RND input.
ShapedTransition shape(TraitorTransition transition, const ScenarioConfig& config, const PotentialHandle& phi,
                       double gamma, bool include_traitors = false);

struct ShapedReturn {
  double U = 0.0;         // discounted unshaped traitor return
  double U_F = 0.0;       // discounted shaped return
  double residual = 0.0;  // U_F - (U - phi_s of the first transition)
};

/// Requires a non-empty episode with contiguous timesteps ending in a terminal transition.
ShapedReturn shaped_return(std::span<const ShapedTransition> episode, double gamma);

/// CSV with header `t,r_V,r_T,phi_s,phi_s_next,F,r_shaped`.
void write_shaped_csv(std::ostream& out, std::span<const ShapedTransition> transitions);

}  // namespace traitor
