#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "traitor/env.hpp"
#include "traitor/rng.hpp"
#include "traitor/tmdp.hpp"

namespace traitor {

/// Explicit tabular MDP with sparse transition rows.
struct FiniteMdp {
  using Row = std::vector<std::pair<int, double>>;  // (next state, probability)

  int num_states = 0;
  int num_actions = 0;
  double gamma = 0.9;
  std::vector<std::vector<Row>> P;          // [s][a]
  std::vector<std::vector<double>> R;       // [s][a]
  std::vector<std::uint8_t> terminal;       // per state
  int horizon = 0;                          // 0 when not episodic-by-time

  /// All rows empty, rewards zero, nothing terminal.
  static FiniteMdp create(int num_states, int num_actions, double gamma);
  /// Marks `s` terminal: every action self-loops with reward 0.
  void make_terminal(int s);
};

/// Throws std::invalid_argument unless every row is a distribution (within
/// 1e-12) over valid states and terminal states self-loop with reward 0.
void validate_mdp(const FiniteMdp& mdp);

struct Solution {
  std::vector<std::vector<double>> Q;
  std::vector<double> V;
  std::vector<std::vector<int>> greedy_sets;  // actions within 1e-9 of the max
  int iterations = 0;
};

inline constexpr double kGreedyTieTolerance = 1e-9;

/// Bellman optimality backups from Q = 0 until the sup-norm change is below tol.
Solution value_iteration(const FiniteMdp& mdp, double tol, int max_iterations = 1000000);

/// Sup-norm of (T Q - Q) for the optimality operator T.
double bellman_residual(const FiniteMdp& mdp, const std::vector<std::vector<double>>& Q);

std::vector<std::vector<int>> greedy_sets(const std::vector<std::vector<double>>& Q,
                                          double tolerance = kGreedyTieTolerance);

/// R'[s][a] = R[s][a] + gamma * E[phi~(s')] - phi(s) for non-terminal s, with
/// phi~(s') = 0 on terminal s' when terminal_zero, else phi(s'). Terminal rows
/// stay absorbing with reward 0.
FiniteMdp shape_mdp(const FiniteMdp& mdp, std::span<const double> phi, bool terminal_zero);

struct InvarianceReport {
  double q_residual_max = 0.0;
  bool greedy_sets_equal = false;
};

/// Solves the unshaped and shaped MDPs and compares Q' with Q - phi~ (the
/// potential the shaped rows actually see: 0 on terminal states when
/// terminal_zero) and the greedy sets state by state.
InvarianceReport verify_invariance(const FiniteMdp& mdp, std::span<const double> phi, bool terminal_zero,
                                   double tol = 1e-10);

/// Generator for the certification sweep: Dirichlet(1) rows, rewards uniform
/// in [-1, 1], gamma uniform in [gamma_min, gamma_max], round(terminal_fraction
/// * states) absorbing states.
struct RandomMdpOptions {
  int min_states = 2;
  int max_states = 20;
  int min_actions = 1;
  int max_actions = 5;
  double gamma_min = 0.5;
  double gamma_max = 0.99;
  double terminal_fraction = 0.1;
};

FiniteMdp random_mdp(Rng& rng, const RandomMdpOptions& options = {});
/// Uniform in [-scale, scale] per state.
std::vector<double> random_potential(Rng& rng, int num_states, double scale = 5.0);

/// Three states: s0 chooses a0 (reward 1, to terminal T1) or a1 (reward 0, to
/// terminal T2); phi(T2) = 10 exceeds the reward gap, gamma = 0.9.
struct Counterexample {
  FiniteMdp mdp;
  std::vector<double> phi;
};
Counterexample terminal_counterexample();

/// Reachable-state enumeration of a TMDP. Actions are joint traitor action ids
/// (sum of a_i * 5^i, 1 action without traitors); illegal components act as
/// noop. Rewards are -r_V. State 0 is reset(scenario, scenario.seed).
struct TmdpEnumeration {
  FiniteMdp mdp;
  std::vector<WorldState> states;
  std::map<std::vector<int>, int> index;  // state_key -> state
};

TmdpEnumeration tmdp_to_mdp(const TmdpSpec& spec, std::size_t max_states = 50000);

/// Tabular traitor Q-learning from the enumeration's start state with uniformly
/// random exploration, compared against value iteration on tmdp_to_mdp.
struct TabularAgreement {
  double q_sup_error = 0.0;  // over non-terminal states and legal joint actions
  double optimum = 0.0;      // V*(start)
  ObjectiveEstimate learned;  // greedy learned policy from the start state
  int states = 0;
  std::uint64_t updates = 0;
};
TabularAgreement tabular_oracle_agreement(const TmdpSpec& spec, int episodes, std::uint64_t seed,
                                          double alpha = 1.0, int eval_episodes = 200);

/// Text layout:
///   FMDP v1
///   states <n> actions <m> gamma <g>
///   terminal <s...>
///   P <s> <a> <s'> <p>   (one line per nonzero entry)
///   R <s> <a> <r>        (one line per nonzero reward)
void write_fmdp(std::ostream& out, const FiniteMdp& mdp);
FiniteMdp read_fmdp(std::istream& in);

}  // namespace traitor
