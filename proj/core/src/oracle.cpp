#include "traitor/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "traitor/errors.hpp"
#include "traitor/text_io.hpp"

namespace traitor {

FiniteMdp FiniteMdp::create(int num_states, int num_actions, double gamma) {
  if (num_states < 1 || num_actions < 1) throw std::invalid_argument("FiniteMdp: need at least one state and action");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("FiniteMdp: gamma must lie in [0, 1)");
  FiniteMdp m;
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.gamma = gamma;
  m.P.assign(num_states, std::vector<Row>(num_actions));
  m.R.assign(num_states, std::vector<double>(num_actions, 0.0));
  m.terminal.assign(num_states, 0);
  return m;
}

void FiniteMdp::make_terminal(int s) {
  terminal.at(s) = 1;
  for (int a = 0; a < num_actions; ++a) {
    P[s][a] = {{s, 1.0}};
    R[s][a] = 0.0;
  }
}

void validate_mdp(const FiniteMdp& m) {
  if (m.num_states < 1 || m.num_actions < 1) throw std::invalid_argument("mdp: empty state or action set");
  if (!(m.gamma >= 0.0 && m.gamma < 1.0)) throw std::invalid_argument("mdp: gamma must lie in [0, 1)");
  if (static_cast<int>(m.P.size()) != m.num_states || static_cast<int>(m.R.size()) != m.num_states ||
      static_cast<int>(m.terminal.size()) != m.num_states) {
    throw std::invalid_argument("mdp: table sizes do not match num_states");
  }
  for (int s = 0; s < m.num_states; ++s) {
    if (static_cast<int>(m.P[s].size()) != m.num_actions || static_cast<int>(m.R[s].size()) != m.num_actions) {
      throw std::invalid_argument("mdp: table sizes do not match num_actions");
    }
    for (int a = 0; a < m.num_actions; ++a) {
      double total = 0.0;
      for (const auto& [next, p] : m.P[s][a]) {
        if (next < 0 || next >= m.num_states) throw std::invalid_argument("mdp: transition to unknown state");
        if (!(p >= 0.0)) throw std::invalid_argument("mdp: negative transition probability");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw std::invalid_argument("mdp: row (" + std::to_string(s) + ", " + std::to_string(a) + ") sums to " +
                                    format_double(total));
      }
      if (!std::isfinite(m.R[s][a])) throw std::invalid_argument("mdp: non-finite reward");
      if (m.terminal[s]) {
        if (m.R[s][a] != 0.0) throw std::invalid_argument("mdp: terminal state with nonzero reward");
        for (const auto& [next, p] : m.P[s][a]) {
          if (p > 0.0 && next != s) throw std::invalid_argument("mdp: terminal state must self-loop");
        }
      }
    }
  }
}

namespace {

double backup(const FiniteMdp& m, const std::vector<double>& V, int s, int a) {
  double expected = 0.0;
  for (const auto& [next, p] : m.P[s][a]) expected += p * V[next];
  return m.R[s][a] + m.gamma * expected;
}

std::vector<double> max_values(const std::vector<std::vector<double>>& Q) {
  std::vector<double> V(Q.size());
  for (std::size_t s = 0; s < Q.size(); ++s) V[s] = *std::max_element(Q[s].begin(), Q[s].end());
  return V;
}

}  // namespace

std::vector<std::vector<int>> greedy_sets(const std::vector<std::vector<double>>& Q, double tolerance) {
  std::vector<std::vector<int>> sets(Q.size());
  for (std::size_t s = 0; s < Q.size(); ++s) {
    const double best = *std::max_element(Q[s].begin(), Q[s].end());
    for (std::size_t a = 0; a < Q[s].size(); ++a) {
      if (Q[s][a] >= best - tolerance) sets[s].push_back(static_cast<int>(a));
    }
  }
  return sets;
}

Solution value_iteration(const FiniteMdp& m, double tol, int max_iterations) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  validate_mdp(m);
  Solution sol;
  sol.Q.assign(m.num_states, std::vector<double>(m.num_actions, 0.0));
  std::vector<double> V(m.num_states, 0.0);
  for (int it = 1; it <= max_iterations; ++it) {
    double change = 0.0;
    for (int s = 0; s < m.num_states; ++s) {
      for (int a = 0; a < m.num_actions; ++a) {
        const double q = backup(m, V, s, a);
        change = std::max(change, std::abs(q - sol.Q[s][a]));
        sol.Q[s][a] = q;
      }
    }
    V = max_values(sol.Q);
    sol.iterations = it;
    if (change < tol) break;
  }
  sol.V = std::move(V);
  sol.greedy_sets = greedy_sets(sol.Q);
  return sol;
}

double bellman_residual(const FiniteMdp& m, const std::vector<std::vector<double>>& Q) {
  const std::vector<double> V = max_values(Q);
  double worst = 0.0;
  for (int s = 0; s < m.num_states; ++s) {
    for (int a = 0; a < m.num_actions; ++a) worst = std::max(worst, std::abs(backup(m, V, s, a) - Q[s][a]));
  }
  return worst;
}

FiniteMdp shape_mdp(const FiniteMdp& m, std::span<const double> phi, bool terminal_zero) {
  if (static_cast<int>(phi.size()) != m.num_states) throw std::invalid_argument("shape_mdp: phi length mismatch");
  FiniteMdp shaped = m;
  for (int s = 0; s < m.num_states; ++s) {
    if (m.terminal[s]) continue;
    for (int a = 0; a < m.num_actions; ++a) {
      double expected = 0.0;
      for (const auto& [next, p] : m.P[s][a]) {
        expected += p * ((terminal_zero && m.terminal[next]) ? 0.0 : phi[next]);
      }
      shaped.R[s][a] = m.R[s][a] + m.gamma * expected - phi[s];
    }
  }
  return shaped;
}

InvarianceReport verify_invariance(const FiniteMdp& m, std::span<const double> phi, bool terminal_zero, double tol) {
  const Solution base = value_iteration(m, tol);
  const Solution shaped = value_iteration(shape_mdp(m, phi, terminal_zero), tol);
  InvarianceReport report;
  report.greedy_sets_equal = base.greedy_sets == shaped.greedy_sets;
  for (int s = 0; s < m.num_states; ++s) {
    const double effective = (m.terminal[s] && terminal_zero) ? 0.0 : phi[s];
    for (int a = 0; a < m.num_actions; ++a) {
      report.q_residual_max =
          std::max(report.q_residual_max, std::abs(shaped.Q[s][a] - (base.Q[s][a] - effective)));
    }
  }
  return report;
}

FiniteMdp random_mdp(Rng& rng, const RandomMdpOptions& o) {
  if (o.min_states < 2 || o.max_states < o.min_states || o.min_actions < 1 || o.max_actions < o.min_actions) {
    throw std::invalid_argument("random_mdp: bad size range");
  }
  const int n = o.min_states + rng.below(o.max_states - o.min_states + 1);
  const int k = o.min_actions + rng.below(o.max_actions - o.min_actions + 1);
  const double gamma = rng.uniform(o.gamma_min, o.gamma_max);
  FiniteMdp m = FiniteMdp::create(n, k, gamma);
  const int terminals = std::min(n - 1, static_cast<int>(std::lround(o.terminal_fraction * n)));
  std::vector<int> order(n);
  for (int s = 0; s < n; ++s) order[s] = s;
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<std::uint8_t> is_terminal(n, 0);
  for (int i = 0; i < terminals; ++i) is_terminal[order[i]] = 1;
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < k; ++a) {
      std::vector<double> w(n);
      double total = 0.0;
      for (double& x : w) total += (x = rng.exponential());
      FiniteMdp::Row row;
      double assigned = 0.0;
      for (int next = 0; next + 1 < n; ++next) {
        row.emplace_back(next, w[next] / total);
        assigned += w[next] / total;
      }
      row.emplace_back(n - 1, 1.0 - assigned);
      m.P[s][a] = std::move(row);
      m.R[s][a] = rng.uniform(-1.0, 1.0);
    }
  }
  for (int s = 0; s < n; ++s) {
    if (is_terminal[s]) m.make_terminal(s);
  }
  return m;
}

std::vector<double> random_potential(Rng& rng, int num_states, double scale) {
  std::vector<double> phi(num_states);
  for (double& p : phi) p = rng.uniform(-scale, scale);
  return phi;
}

Counterexample terminal_counterexample() {
  Counterexample ce;
  ce.mdp = FiniteMdp::create(3, 2, 0.9);
  ce.mdp.P[0][0] = {{1, 1.0}};
  ce.mdp.R[0][0] = 1.0;
  ce.mdp.P[0][1] = {{2, 1.0}};
  ce.mdp.R[0][1] = 0.0;
  ce.mdp.make_terminal(1);
  ce.mdp.make_terminal(2);
  ce.phi = {0.0, 0.0, 10.0};
  return ce;
}

namespace {

int int_pow(int base, int exp) {
  int r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

// Enumerates the victims' joint action distribution as (probability, actions) pairs.
void victim_combinations(const std::vector<std::vector<double>>& dists, std::size_t k, double p,
                         std::vector<int>& current, std::vector<std::pair<double, std::vector<int>>>& out) {
  if (k == dists.size()) {
    out.emplace_back(p, current);
    return;
  }
  for (std::size_t a = 0; a < dists[k].size(); ++a) {
    if (dists[k][a] <= 0.0) continue;
    current[k] = static_cast<int>(a);
    victim_combinations(dists, k + 1, p * dists[k][a], current, out);
  }
}

}  // namespace

TmdpEnumeration tmdp_to_mdp(const TmdpSpec& spec, std::size_t max_states) {
  if (!spec.victim_policy) throw StateError("tmdp_to_mdp: no victim policy loaded");
  const ScenarioConfig& c = spec.scenario;
  const TeamSpec victims = spec.victim_team();
  const int traitor_actions = c.num_actions(Team::traitor);
  const int joint_count = int_pow(traitor_actions, c.num_traitors);

  TmdpEnumeration e;
  std::vector<std::uint8_t> terminal;
  struct Edge {
    int s;
    int a;
    int next;
    double p;
    double r;
  };
  std::vector<Edge> edges;
  auto intern = [&](const WorldState& w, bool done) {
    auto key = state_key(w);
    const auto it = e.index.find(key);
    if (it != e.index.end()) return it->second;
    if (e.states.size() >= max_states) {
      throw CapacityError("tmdp_to_mdp: more than " + std::to_string(max_states) + " reachable states");
    }
    const int id = static_cast<int>(e.states.size());
    e.index.emplace(std::move(key), id);
    e.states.push_back(w);
    terminal.push_back(done ? 1 : 0);
    return id;
  };

  intern(reset(c, c.seed), false);
  for (std::size_t s = 0; s < e.states.size(); ++s) {
    if (terminal[s]) continue;
    const WorldState state = e.states[s];
    std::vector<std::vector<double>> dists;
    for (int v = 0; v < c.num_victims; ++v) dists.push_back(spec.victim_policy->distribution(victims, state, v));
    std::vector<std::pair<double, std::vector<int>>> combos;
    std::vector<int> current(c.num_victims, 0);
    victim_combinations(dists, 0, 1.0, current, combos);
    const auto enemy = scripted_enemy_policy(c, state);
    std::vector<std::vector<std::uint8_t>> masks;
    for (int unit : spec.traitor_indices) {
      masks.push_back(state.units[unit].alive ? legal_mask(c, state, unit) : std::vector<std::uint8_t>{});
    }
    for (int a = 0; a < joint_count; ++a) {
      std::vector<AgentAction> joint(c.num_units(), AgentAction::noop());
      int rest = a;
      for (std::size_t k = 0; k < spec.traitor_indices.size(); ++k) {
        const int id = rest % traitor_actions;
        rest /= traitor_actions;
        if (!masks[k].empty() && masks[k][id]) joint[spec.traitor_indices[k]] = action_from_id(c, Team::traitor, id);
      }
      std::copy(enemy.begin(), enemy.end(), joint.begin() + c.first_enemy());
      for (const auto& [p, ids] : combos) {
        for (int v = 0; v < c.num_victims; ++v) joint[v] = action_from_id(c, Team::victim, ids[v]);
        const StepOutcome out = step(c, state, joint);
        const int next = intern(out.next_state, out.done);
        edges.push_back({static_cast<int>(s), a, next, p, -out.reward});
      }
    }
  }

  e.mdp = FiniteMdp::create(static_cast<int>(e.states.size()), joint_count, spec.gamma);
  e.mdp.horizon = c.max_steps;
  for (const Edge& edge : edges) {
    auto& row = e.mdp.P[edge.s][edge.a];
    const auto it = std::find_if(row.begin(), row.end(), [&](const auto& entry) { return entry.first == edge.next; });
    if (it == row.end()) {
      row.emplace_back(edge.next, edge.p);
    } else {
      it->second += edge.p;
    }
    e.mdp.R[edge.s][edge.a] += edge.p * edge.r;
  }
  for (int s = 0; s < e.mdp.num_states; ++s) {
    if (terminal[s]) e.mdp.make_terminal(s);
  }
  return e;
}

TabularAgreement tabular_oracle_agreement(const TmdpSpec& spec, int episodes, std::uint64_t seed, double alpha,
                                          int eval_episodes) {
  if (episodes < 1) throw std::invalid_argument("tabular_oracle_agreement: episodes must be positive");
  const TmdpEnumeration e = tmdp_to_mdp(spec);
  const Solution sol = value_iteration(e.mdp, 1e-12);
  LearnerConfig lc;
  lc.gamma = spec.gamma;
  lc.tabular_alpha = alpha;
  TabularLearner learner(spec.traitor_team(), lc);
  Rng rng(derive_seed(seed, 2));
  TabularAgreement out;
  out.states = e.mdp.num_states;
  out.optimum = sol.V[0];
  for (int ep = 0; ep < episodes; ++ep) {
    WorldState s = e.states[0];
    while (true) {
      const std::vector<int> actions = learner.act(s, 1.0, rng);
      TraitorTransition tr = tmdp_step(spec, s, actions, rng);
      learner.observe(ReplayItem{s, actions, tr.r_traitor, tr.next_state, tr.done});
      ++out.updates;
      if (tr.done) break;
      s = std::move(tr.next_state);
    }
  }
  for (int i = 0; i < e.mdp.num_states; ++i) {
    if (e.mdp.terminal[i]) continue;
    const std::uint64_t id = state_id(e.states[i]);
    const auto mask = learner.joint_mask(e.states[i]);
    for (int a = 0; a < e.mdp.num_actions; ++a) {
      if (!mask[a]) continue;
      out.q_sup_error = std::max(out.q_sup_error, std::abs(learner.table().get(id, a) - sol.Q[i][a]));
    }
  }
  TmdpSpec fixed_start = spec;
  fixed_start.scenario.layout = SpawnLayout::explicit_coordinates;
  fixed_start.scenario.spawns.clear();
  for (const Unit& u : e.states[0].units) fixed_start.scenario.spawns.emplace_back(u.x, u.y);
  out.learned = traitor_objective_estimate(fixed_start, learner_policy(learner), eval_episodes, derive_seed(seed, 3));
  return out;
}

void write_fmdp(std::ostream& out, const FiniteMdp& m) {
  validate_mdp(m);
  out << "FMDP v1\n";
  out << "states " << m.num_states << " actions " << m.num_actions << " gamma " << format_double(m.gamma) << '\n';
  out << "terminal";
  for (int s = 0; s < m.num_states; ++s) {
    if (m.terminal[s]) out << ' ' << s;
  }
  out << '\n';
  for (int s = 0; s < m.num_states; ++s) {
    for (int a = 0; a < m.num_actions; ++a) {
      for (const auto& [next, p] : m.P[s][a]) out << "P " << s << ' ' << a << ' ' << next << ' ' << format_double(p) << '\n';
    }
  }
  for (int s = 0; s < m.num_states; ++s) {
    for (int a = 0; a < m.num_actions; ++a) {
      if (m.R[s][a] != 0.0) out << "R " << s << ' ' << a << ' ' << format_double(m.R[s][a]) << '\n';
    }
  }
}

FiniteMdp read_fmdp(std::istream& in) {
  LineReader reader(in);
  if (trim(reader.expect("FMDP header")) != "FMDP v1") reader.fail("expected 'FMDP v1'");
  const std::string sizes = reader.expect("size line");
  const auto f = split(trim(sizes), ' ');
  if (f.size() != 6 || f[0] != "states" || f[2] != "actions" || f[4] != "gamma") {
    reader.fail("expected 'states <n> actions <m> gamma <g>'");
  }
  const long long n = parse_int(f[1], reader.line());
  const long long k = parse_int(f[3], reader.line());
  const double gamma = parse_double(f[5], reader.line());
  if (n < 1 || k < 1 || n > 10000000 || k > 100000) reader.fail("state/action counts out of range");
  if (!(gamma >= 0.0 && gamma < 1.0)) reader.fail("gamma must lie in [0, 1)");
  FiniteMdp m = FiniteMdp::create(static_cast<int>(n), static_cast<int>(k), gamma);

  const std::string term = reader.expect("terminal line");
  const auto tf = split(trim(term), ' ');
  if (tf.empty() || tf[0] != "terminal") reader.fail("expected 'terminal ...'");
  for (std::size_t i = 1; i < tf.size(); ++i) {
    const long long s = parse_int(tf[i], reader.line());
    if (s < 0 || s >= n) reader.fail("terminal state out of range");
    m.terminal[s] = 1;
  }
  auto index = [&](std::string_view token, long long limit) {
    const long long v = parse_int(token, reader.line());
    if (v < 0 || v >= limit) reader.fail("index out of range");
    return static_cast<int>(v);
  };
  std::string line;
  while (reader.next(line)) {
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto parts = split(view, ' ');
    if (parts[0] == "P" && parts.size() == 5) {
      const int s = index(parts[1], n);
      const int a = index(parts[2], k);
      const int next = index(parts[3], n);
      m.P[s][a].emplace_back(next, parse_double(parts[4], reader.line()));
    } else if (parts[0] == "R" && parts.size() == 4) {
      const int s = index(parts[1], n);
      const int a = index(parts[2], k);
      m.R[s][a] = parse_double(parts[3], reader.line());
    } else {
      reader.fail("expected 'P s a s' p' or 'R s a r'");
    }
  }
  validate_mdp(m);
  return m;
}

}  // namespace traitor
