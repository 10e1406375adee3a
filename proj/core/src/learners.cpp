#include "traitor/learners.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "traitor/errors.hpp"
#include "traitor/text_io.hpp"

namespace traitor {

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::tabular: return "tabular";
    case LearnerKind::vdn: return "vdn";
    case LearnerKind::qmix_lite: return "qmix_lite";
  }
  return "vdn";
}

LearnerKind parse_learner_kind(std::string_view name) {
  if (name == "tabular") return LearnerKind::tabular;
  if (name == "vdn") return LearnerKind::vdn;
  if (name == "qmix_lite" || name == "qmix") return LearnerKind::qmix_lite;
  throw std::invalid_argument("unknown learner kind '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// TeamSpec

TeamSpec TeamSpec::victims(const ScenarioConfig& scenario) {
  TeamSpec t;
  t.scenario = scenario;
  t.team = Team::victim;
  t.view = AgentView::victim_local;
  for (int i = 0; i < scenario.num_victims; ++i) t.units.push_back(i);
  return t;
}

TeamSpec TeamSpec::traitors(const ScenarioConfig& scenario) {
  TeamSpec t;
  t.scenario = scenario;
  t.team = Team::traitor;
  t.view = AgentView::traitor_full;
  for (int i = scenario.first_traitor(); i < scenario.first_enemy(); ++i) t.units.push_back(i);
  return t;
}

int TeamSpec::input_dim() const {
  if (view == AgentView::traitor_full) return observation_size(scenario) + global_state_size(scenario) + num_agents();
  const int others = scenario.num_victims + scenario.num_enemies - 1;
  return 3 + 4 * others + num_agents();
}

Vec TeamSpec::agent_input(const WorldState& state, int agent) const {
  Vec input = Vec::Zero(input_dim());
  const int unit = units.at(agent);
  const int features = input_dim() - num_agents();
  if (state.units[unit].alive) {
    int local = features;
    if (view == AgentView::traitor_full) {
      local = observation_size(scenario);
      input.head(local) = observe(scenario, state, unit);
      input.segment(local, features - local) = global_state(scenario, state);
    } else {
      input.head(local) = observe_without_traitors(scenario, state, unit);
    }
    // Offsets arrive in cells; scale them to the unit range like the own-position features.
    for (int base = 3; base + 3 < local; base += 4) {
      input(base + 1) /= scenario.grid_width;
      input(base + 2) /= scenario.grid_height;
    }
  }
  input(features + agent) = 1.0;
  return input;
}

std::vector<std::uint8_t> TeamSpec::mask(const WorldState& state, int agent) const {
  const int unit = units.at(agent);
  if (!state.units[unit].alive) {
    std::vector<std::uint8_t> m(num_actions(), 0);
    m[0] = 1;
    return m;
  }
  return legal_mask(scenario, state, unit);
}

// ---------------------------------------------------------------------------
// Replay, exploration, tabular values

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 4096));
}

void ReplayBuffer::push(ReplayItem item) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(item));
  } else {
    items_[insertions_ % capacity_] = std::move(item);
  }
  ++insertions_;
}

std::vector<const ReplayItem*> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (items_.empty()) throw std::invalid_argument("ReplayBuffer: sampling from an empty buffer");
  std::vector<const ReplayItem*> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(&items_[rng.below(static_cast<std::uint64_t>(items_.size()))]);
  return out;
}

double EpsSchedule::at(std::int64_t step) const {
  if (decay_steps <= 0 || step >= decay_steps) return eps_end;
  const double frac = static_cast<double>(std::max<std::int64_t>(step, 0)) / static_cast<double>(decay_steps);
  return eps_start + (eps_end - eps_start) * frac;
}

int epsilon_greedy(const Vec& q_values, std::span<const std::uint8_t> legal, double eps, Rng& rng) {
  if (static_cast<Eigen::Index>(legal.size()) != q_values.size()) {
    throw std::invalid_argument("epsilon_greedy: mask length mismatch");
  }
  std::vector<int> allowed;
  for (std::size_t a = 0; a < legal.size(); ++a) {
    if (legal[a]) allowed.push_back(static_cast<int>(a));
  }
  if (allowed.empty()) throw std::invalid_argument("epsilon_greedy: no legal action");
  if (rng.uniform() < eps) return allowed[rng.below(static_cast<int>(allowed.size()))];
  int best = allowed.front();
  for (const int a : allowed) {
    if (q_values(a) > q_values(best)) best = a;
  }
  return best;
}

double QTable::get(std::uint64_t state, int action) const {
  const auto it = table_.find(state);
  return it == table_.end() ? 0.0 : it->second.at(action);
}

void QTable::set(std::uint64_t state, int action, double value) {
  auto& row = table_[state];
  if (row.empty()) row.assign(num_actions_, 0.0);
  row.at(action) = value;
}

double QTable::max_value(std::uint64_t state, std::span<const std::uint8_t> legal) const {
  const auto it = table_.find(state);
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < num_actions_; ++a) {
    if (!legal.empty() && !legal[a]) continue;
    best = std::max(best, it == table_.end() ? 0.0 : it->second[a]);
  }
  return std::isinf(best) ? 0.0 : best;
}

const std::vector<double>* QTable::row(std::uint64_t state) const {
  const auto it = table_.find(state);
  return it == table_.end() ? nullptr : &it->second;
}

void tabular_update(QTable& table, std::uint64_t state, int action, double reward, std::uint64_t next_state,
                    bool done, double alpha, double gamma, std::span<const std::uint8_t> next_legal) {
  const double bootstrap = done ? 0.0 : table.max_value(next_state, next_legal);
  const double current = table.get(state, action);
  table.set(state, action, current + alpha * (reward + gamma * bootstrap - current));
}

// ---------------------------------------------------------------------------
// QMIX-lite mixer

QmixMixer QmixMixer::create(int state_dim, int num_agents, int embed, std::uint64_t seed) {
  QmixMixer m;
  m.hyper_w1 = mlp_init({state_dim, embed * std::max(num_agents, 1)}, derive_seed(seed, 11));
  m.hyper_b1 = mlp_init({state_dim, embed}, derive_seed(seed, 12));
  m.hyper_w2 = mlp_init({state_dim, embed}, derive_seed(seed, 13));
  m.hyper_b2 = mlp_init({state_dim, embed, 1}, derive_seed(seed, 14));
  return m;
}

int QmixMixer::num_agents() const { return hyper_w1.output_dim() / embed(); }

namespace {

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

Vec qmix_mix_batch(const QmixMixer& mixer, const Mat& agent_qs, const Mat& states, MixerTape* tape) {
  const int n = mixer.num_agents();
  const int e = mixer.embed();
  if (agent_qs.rows() != n || agent_qs.cols() != states.cols()) throw std::invalid_argument("qmix_mix: agent_qs shape mismatch");
  if (states.rows() != mixer.hyper_w1.input_dim()) throw std::invalid_argument("qmix_mix: state length mismatch");
  MixerTape local;
  MixerTape& t = tape ? *tape : local;
  t.w1_raw = mlp_forward_batch(mixer.hyper_w1, states, &t.w1);
  const Mat b1 = mlp_forward_batch(mixer.hyper_b1, states, &t.b1);
  t.w2_raw = mlp_forward_batch(mixer.hyper_w2, states, &t.w2);
  const Mat b2 = mlp_forward_batch(mixer.hyper_b2, states, &t.b2);
  const Eigen::Index batch = states.cols();
  t.agent_qs = agent_qs;
  t.pre.resize(e, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Eigen::Map<const Mat> w1(t.w1_raw.col(b).data(), e, n);
    t.pre.col(b) = w1.cwiseAbs() * agent_qs.col(b) + b1.col(b);
  }
  t.hidden = t.pre.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
  Vec q_tot(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    q_tot(b) = t.w2_raw.col(b).cwiseAbs().dot(t.hidden.col(b)) + b2(0, b);
  }
  return q_tot;
}

Mat qmix_mix_backward(const QmixMixer& mixer, const MixerTape& t, const Vec& upstream, std::span<GradBundle> grads) {
  const int n = mixer.num_agents();
  const int e = mixer.embed();
  const Eigen::Index batch = upstream.size();
  if (grads.size() != 4) throw std::invalid_argument("qmix_mix_backward: need four gradient bundles");
  Mat d_w1(static_cast<Eigen::Index>(e) * n, batch);
  Mat d_b1(e, batch);
  Mat d_w2(e, batch);
  Mat d_b2(1, batch);
  Mat d_q(n, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double g = upstream(b);
    d_b2(0, b) = g;
    d_w2.col(b) = g * t.hidden.col(b).cwiseProduct(t.w2_raw.col(b).unaryExpr(&sign_of));
    Vec d_pre = g * t.w2_raw.col(b).cwiseAbs();
    for (int k = 0; k < e; ++k) d_pre(k) *= t.pre(k, b) > 0.0 ? 1.0 : std::exp(t.pre(k, b));
    d_b1.col(b) = d_pre;
    const Eigen::Map<const Mat> w1(t.w1_raw.col(b).data(), e, n);
    Mat dw = d_pre * t.agent_qs.col(b).transpose();  // e x n
    dw = dw.cwiseProduct(w1.unaryExpr(&sign_of));
    d_w1.col(b) = Eigen::Map<const Vec>(dw.data(), dw.size());
    d_q.col(b) = w1.cwiseAbs().transpose() * d_pre;
  }
  mlp_backward_batch(mixer.hyper_w1, t.w1, d_w1, grads[0]);
  mlp_backward_batch(mixer.hyper_b1, t.b1, d_b1, grads[1]);
  mlp_backward_batch(mixer.hyper_w2, t.w2, d_w2, grads[2]);
  mlp_backward_batch(mixer.hyper_b2, t.b2, d_b2, grads[3]);
  return d_q;
}

double qmix_mix(const QmixMixer& mixer, const Vec& agent_qs, const Vec& state) {
  if (agent_qs.size() != mixer.num_agents()) throw std::invalid_argument("qmix_mix: agent_qs length mismatch");
  return qmix_mix_batch(mixer, agent_qs, state)(0);
}

// ---------------------------------------------------------------------------
// ValueLearner

ValueLearner::ValueLearner(LearnerKind kind, TeamSpec team, LearnerConfig config, std::uint64_t seed)
    : TeamLearner(std::move(team), std::move(config)),
      kind_(kind),
      replay_(static_cast<std::size_t>(config_.replay_capacity)),
      sample_rng_(derive_seed(seed, 3)) {
  if (kind == LearnerKind::tabular) throw std::invalid_argument("ValueLearner: use TabularLearner for tabular");
  std::vector<int> dims{team_.input_dim()};
  dims.insert(dims.end(), config_.hidden.begin(), config_.hidden.end());
  dims.push_back(team_.num_actions());
  agent_net_ = mlp_init(dims, derive_seed(seed, 1));
  target_agent_net_ = agent_net_;
  agent_opt_ = make_opt_state(agent_net_, Optimizer::adam, config_.lr);
  if (kind_ == LearnerKind::qmix_lite) {
    mixer_ = QmixMixer::create(team_.state_dim(), team_.num_agents(), config_.mixer_embed, derive_seed(seed, 2));
    target_mixer_ = mixer_;
    for (const MlpParams* net : mixer_.nets()) mixer_opt_.push_back(make_opt_state(*net, Optimizer::adam, config_.lr));
  }
}

void ValueLearner::set_networks(MlpParams agent, QmixMixer mixer) {
  agent_net_ = std::move(agent);
  target_agent_net_ = agent_net_;
  agent_opt_ = make_opt_state(agent_net_, Optimizer::adam, config_.lr);
  if (kind_ == LearnerKind::qmix_lite) {
    mixer_ = std::move(mixer);
    target_mixer_ = mixer_;
    mixer_opt_.clear();
    for (const MlpParams* net : mixer_.nets()) mixer_opt_.push_back(make_opt_state(*net, Optimizer::adam, config_.lr));
  }
}

std::vector<int> ValueLearner::act(const WorldState& state, double eps, Rng& rng) const {
  const int n = team_.num_agents();
  std::vector<int> actions(n, 0);
  if (n == 0) return actions;
  Mat inputs(team_.input_dim(), n);
  for (int i = 0; i < n; ++i) inputs.col(i) = team_.agent_input(state, i);
  const Mat q = mlp_forward_batch(agent_net_, inputs);
  for (int i = 0; i < n; ++i) {
    if (!state.units[team_.units[i]].alive) continue;
    const auto mask = team_.mask(state, i);
    actions[i] = epsilon_greedy(q.col(i), mask, eps, rng);
  }
  return actions;
}

double ValueLearner::mix(const Vec& agent_qs, const Vec& state) const {
  if (kind_ == LearnerKind::vdn) {
    if (agent_qs.size() != team_.num_agents()) throw std::invalid_argument("mix: agent_qs length mismatch");
    return agent_qs.sum();
  }
  return qmix_mix(mixer_, agent_qs, state);
}

double ValueLearner::loss_impl(std::span<const ReplayItem* const> batch, const MlpParams& target_agent,
                               const QmixMixer& target_mixer, LearnerGrads* grads) const {
  if (batch.empty()) throw std::invalid_argument("learn: empty batch");
  const int n = team_.num_agents();
  const Eigen::Index bsz = static_cast<Eigen::Index>(batch.size());
  const int dim = team_.input_dim();
  Mat inputs(dim, bsz * n);
  Mat next_inputs(dim, bsz * n);
  Mat states(team_.state_dim(), bsz);
  Mat next_states(team_.state_dim(), bsz);
  for (Eigen::Index b = 0; b < bsz; ++b) {
    const ReplayItem& item = *batch[b];
    if (static_cast<int>(item.actions.size()) != n) throw std::invalid_argument("learn: action count mismatch");
    for (int i = 0; i < n; ++i) {
      inputs.col(b * n + i) = team_.agent_input(item.state, i);
      next_inputs.col(b * n + i) = team_.agent_input(item.next_state, i);
    }
    if (kind_ == LearnerKind::qmix_lite) {
      states.col(b) = global_state(team_.scenario, item.state);
      next_states.col(b) = global_state(team_.scenario, item.next_state);
    }
  }

  ForwardTape tape;
  const Mat q = mlp_forward_batch(agent_net_, inputs, grads ? &tape : nullptr);
  const Mat q_next = mlp_forward_batch(target_agent, next_inputs);
  Mat q_next_online;
  if (config_.double_q) q_next_online = mlp_forward_batch(agent_net_, next_inputs);

  Mat chosen = Mat::Zero(n, bsz);
  Mat next_best = Mat::Zero(n, bsz);
  std::vector<std::uint8_t> alive(static_cast<std::size_t>(n * bsz), 0);
  for (Eigen::Index b = 0; b < bsz; ++b) {
    const ReplayItem& item = *batch[b];
    for (int i = 0; i < n; ++i) {
      const int unit = team_.units[i];
      if (item.state.units[unit].alive) {
        alive[b * n + i] = 1;
        chosen(i, b) = q(item.actions[i], b * n + i);
      }
      if (!item.done && item.next_state.units[unit].alive) {
        const auto mask = team_.mask(item.next_state, i);
        const Mat& chooser = config_.double_q ? q_next_online : q_next;
        int best_a = -1;
        for (int a = 0; a < team_.num_actions(); ++a) {
          if (mask[a] && (best_a < 0 || chooser(a, b * n + i) > chooser(best_a, b * n + i))) best_a = a;
        }
        next_best(i, b) = q_next(best_a, b * n + i);
      }
    }
  }

  Vec q_tot;
  Vec next_tot;
  MixerTape mixer_tape;
  if (kind_ == LearnerKind::vdn) {
    q_tot = chosen.colwise().sum().transpose();
    next_tot = next_best.colwise().sum().transpose();
  } else {
    q_tot = qmix_mix_batch(mixer_, chosen, states, grads ? &mixer_tape : nullptr);
    next_tot = qmix_mix_batch(target_mixer, next_best, next_states);
  }

  Vec diff(bsz);
  for (Eigen::Index b = 0; b < bsz; ++b) {
    const ReplayItem& item = *batch[b];
    const double target = config_.reward_scale * item.reward + (item.done ? 0.0 : config_.gamma * next_tot(b));
    diff(b) = q_tot(b) - target;
  }
  const double loss = diff.squaredNorm() / static_cast<double>(bsz);
  if (!grads) return loss;

  const Vec upstream = (2.0 / static_cast<double>(bsz)) * diff;
  Mat d_chosen;
  grads->agent = GradBundle::zeros_like(agent_net_);
  grads->mixer.clear();
  if (kind_ == LearnerKind::vdn) {
    d_chosen = upstream.transpose().replicate(n, 1);
  } else {
    for (const MlpParams* net : mixer_.nets()) grads->mixer.push_back(GradBundle::zeros_like(*net));
    d_chosen = qmix_mix_backward(mixer_, mixer_tape, upstream, grads->mixer);
  }
  Mat d_q = Mat::Zero(q.rows(), q.cols());
  for (Eigen::Index b = 0; b < bsz; ++b) {
    for (int i = 0; i < n; ++i) {
      if (alive[b * n + i]) d_q(batch[b]->actions[i], b * n + i) = d_chosen(i, b);
    }
  }
  mlp_backward_batch(agent_net_, tape, d_q, grads->agent);
  return loss;
}

double ValueLearner::loss_and_grads(std::span<const ReplayItem* const> batch, LearnerGrads* grads) const {
  return loss_impl(batch, target_agent_net_, target_mixer_, grads);
}

double ValueLearner::loss_with_online_targets(std::span<const ReplayItem* const> batch) const {
  return loss_impl(batch, agent_net_, mixer_, nullptr);
}

double ValueLearner::learn_step(std::span<const ReplayItem* const> batch) {
  LearnerGrads grads;
  const double loss = loss_and_grads(batch, &grads);
  std::vector<GradBundle*> all{&grads.agent};
  for (GradBundle& g : grads.mixer) all.push_back(&g);
  clip_grad_norm(all, config_.grad_clip);
  opt_step(agent_net_, grads.agent, agent_opt_);
  if (kind_ == LearnerKind::qmix_lite) {
    auto nets = mixer_.nets();
    for (std::size_t k = 0; k < nets.size(); ++k) opt_step(*nets[k], grads.mixer[k], mixer_opt_[k]);
  }
  ++updates_;
  if (config_.target_sync_every > 0 && updates_ % static_cast<std::uint64_t>(config_.target_sync_every) == 0) {
    sync_targets();
  }
  return loss;
}

void ValueLearner::set_learning_rate(double lr) {
  if (!(lr >= 0.0)) throw std::invalid_argument("set_learning_rate: learning rate must be non-negative");
  agent_opt_.lr = lr;
  for (OptState& opt : mixer_opt_) opt.lr = lr;
}

void ValueLearner::sync_targets() {
  target_agent_net_ = agent_net_;
  target_mixer_ = mixer_;
}

double ValueLearner::observe(ReplayItem item) {
  replay_.push(std::move(item));
  ++observed_;
  const std::size_t ready = static_cast<std::size_t>(std::max(config_.learning_starts, config_.batch_size));
  if (replay_.size() < ready) return -1.0;
  if (config_.train_every > 1 && observed_ % static_cast<std::uint64_t>(config_.train_every) != 0) return -1.0;
  const auto batch = replay_.sample(static_cast<std::size_t>(config_.batch_size), sample_rng_);
  return learn_step(batch);
}

namespace {

void write_header(std::ostream& out, LearnerKind kind, Team team, const LearnerMeta& meta) {
  out << "LEARNER v1\n"
      << "kind: " << to_string(kind) << '\n'
      << "team: " << (team == Team::traitor ? "traitor" : "victim") << '\n'
      << "scenario_hash: " << meta.scenario_hash << '\n'
      << "seed: " << meta.seed << '\n'
      << "steps: " << meta.steps << '\n';
}

std::string header_value(LineReader& reader, std::string_view key) {
  const std::string line = reader.expect(key);
  const std::string_view view = trim(line);
  if (!view.starts_with(key) || view.size() <= key.size() || view[key.size()] != ':') {
    reader.fail("expected '" + std::string(key) + ":'");
  }
  return std::string(trim(view.substr(key.size() + 1)));
}

}  // namespace

void ValueLearner::write(std::ostream& out, const LearnerMeta& meta) const {
  write_header(out, kind_, team_.team, meta);
  out << "nets: " << (kind_ == LearnerKind::qmix_lite ? 5 : 1) << '\n';
  write_mlp(out, agent_net_);
  if (kind_ == LearnerKind::qmix_lite) {
    for (const MlpParams* net : mixer_.nets()) write_mlp(out, *net);
  }
}

// ---------------------------------------------------------------------------
// TabularLearner

namespace {

int int_pow(int base, int exp) {
  int r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

TabularLearner::TabularLearner(TeamSpec team, LearnerConfig config)
    : TeamLearner(std::move(team), std::move(config)),
      table_(int_pow(team_.num_actions(), team_.num_agents())) {}

int TabularLearner::joint_action(std::span<const int> actions) const {
  int joint = 0;
  for (int i = team_.num_agents() - 1; i >= 0; --i) joint = joint * team_.num_actions() + actions[i];
  return joint;
}

std::vector<int> TabularLearner::split_joint_action(int joint) const {
  std::vector<int> actions(team_.num_agents());
  for (int i = 0; i < team_.num_agents(); ++i) {
    actions[i] = joint % team_.num_actions();
    joint /= team_.num_actions();
  }
  return actions;
}

std::vector<std::uint8_t> TabularLearner::joint_mask(const WorldState& state) const {
  std::vector<std::vector<std::uint8_t>> masks;
  for (int i = 0; i < team_.num_agents(); ++i) masks.push_back(team_.mask(state, i));
  std::vector<std::uint8_t> joint(table_.num_actions(), 0);
  for (int j = 0; j < table_.num_actions(); ++j) {
    const auto parts = split_joint_action(j);
    bool ok = true;
    for (int i = 0; i < team_.num_agents() && ok; ++i) ok = masks[i][parts[i]] != 0;
    joint[j] = ok ? 1 : 0;
  }
  return joint;
}

std::vector<int> TabularLearner::act(const WorldState& state, double eps, Rng& rng) const {
  const auto mask = joint_mask(state);
  Vec q = Vec::Zero(table_.num_actions());
  if (const auto* row = table_.row(state_id(state))) q = Eigen::Map<const Vec>(row->data(), row->size());
  return split_joint_action(epsilon_greedy(q, mask, eps, rng));
}

double TabularLearner::observe(ReplayItem item) {
  const auto next_mask = item.done ? std::vector<std::uint8_t>{} : joint_mask(item.next_state);
  const std::uint64_t s = state_id(item.state);
  const int a = joint_action(item.actions);
  const double before = table_.get(s, a);
  tabular_update(table_, s, a, config_.reward_scale * item.reward, state_id(item.next_state), item.done,
                 config_.tabular_alpha, config_.gamma, next_mask);
  return std::abs(table_.get(s, a) - before);
}

void TabularLearner::write(std::ostream& out, const LearnerMeta& meta) const {
  write_header(out, LearnerKind::tabular, team_.team, meta);
  std::vector<std::uint64_t> ids;
  for (const auto& [id, row] : table_.entries()) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  out << "table: " << ids.size() << ' ' << table_.num_actions() << '\n';
  for (const std::uint64_t id : ids) {
    out << id;
    for (const double v : *table_.row(id)) out << ' ' << format_double(v);
    out << '\n';
  }
}

std::unique_ptr<TeamLearner> make_learner(LearnerKind kind, const TeamSpec& team, const LearnerConfig& config,
                                          std::uint64_t seed) {
  if (kind == LearnerKind::tabular) return std::make_unique<TabularLearner>(team, config);
  return std::make_unique<ValueLearner>(kind, team, config, seed);
}

LoadedLearner read_learner(std::istream& in, const TeamSpec& team, const LearnerConfig& config) {
  LineReader reader(in);
  if (trim(reader.expect("LEARNER header")) != "LEARNER v1") reader.fail("expected 'LEARNER v1'");
  LoadedLearner loaded;
  const LearnerKind kind = parse_learner_kind(header_value(reader, "kind"));
  const std::string team_name = header_value(reader, "team");
  if (team_name != "victim" && team_name != "traitor") reader.fail("unknown team '" + team_name + "'");
  loaded.team = team_name == "traitor" ? Team::traitor : Team::victim;
  loaded.meta.scenario_hash = parse_u64(header_value(reader, "scenario_hash"), reader.line());
  loaded.meta.seed = parse_u64(header_value(reader, "seed"), reader.line());
  loaded.meta.steps = parse_u64(header_value(reader, "steps"), reader.line());

  if (kind == LearnerKind::tabular) {
    auto learner = std::make_unique<TabularLearner>(team, config);
    const std::string table_line = header_value(reader, "table");
    const auto dims = split(table_line, ' ');
    if (dims.size() != 2) reader.fail("expected 'table: <rows> <actions>'");
    const auto rows = parse_u64(dims[0], reader.line());
    if (static_cast<int>(parse_int(dims[1], reader.line())) != learner->num_joint_actions()) {
      reader.fail("table action count does not match the team");
    }
    for (std::uint64_t r = 0; r < rows; ++r) {
      const std::string line = reader.expect("table row");
      const auto parts = split(trim(line), ' ');
      if (static_cast<int>(parts.size()) != learner->num_joint_actions() + 1) reader.fail("table row has wrong length");
      const std::uint64_t id = parse_u64(parts[0], reader.line());
      for (int a = 0; a < learner->num_joint_actions(); ++a) {
        learner->table().set(id, a, parse_double(parts[a + 1], reader.line()));
      }
    }
    loaded.learner = std::move(learner);
    return loaded;
  }

  const auto nets = parse_int(header_value(reader, "nets"), reader.line());
  const long long expected = kind == LearnerKind::qmix_lite ? 5 : 1;
  if (nets != expected) reader.fail("unexpected network count");
  auto learner = std::make_unique<ValueLearner>(kind, team, config, loaded.meta.seed);
  MlpParams agent = read_mlp(reader);
  if (agent.input_dim() != team.input_dim() || agent.output_dim() != team.num_actions()) {
    throw std::invalid_argument("learner checkpoint does not match the team's input/action sizes");
  }
  QmixMixer mixer;
  if (kind == LearnerKind::qmix_lite) {
    for (MlpParams* net : mixer.nets()) *net = read_mlp(reader);
    if (mixer.hyper_w1.input_dim() != team.state_dim() || mixer.num_agents() != team.num_agents()) {
      throw std::invalid_argument("mixer checkpoint does not match the team");
    }
  }
  learner->set_networks(std::move(agent), std::move(mixer));
  loaded.learner = std::move(learner);
  return loaded;
}

// ---------------------------------------------------------------------------
// Victim training and evaluation

namespace {

std::vector<AgentAction> joint_actions(const TeamSpec& team, const std::vector<int>& ids,
                                       const WorldState& state) {
  const ScenarioConfig& c = team.scenario;
  std::vector<AgentAction> joint(c.num_units(), AgentAction::noop());
  for (int i = 0; i < team.num_agents(); ++i) {
    if (state.units[team.units[i]].alive) joint[team.units[i]] = action_from_id(c, team.team, ids[i]);
  }
  const auto enemy = scripted_enemy_policy(c, state);
  std::copy(enemy.begin(), enemy.end(), joint.begin() + c.first_enemy());
  return joint;
}

int count_dead(const WorldState& state, int first, int last) {
  int dead = 0;
  for (int i = first; i < last; ++i) dead += state.units[i].alive ? 0 : 1;
  return dead;
}

}  // namespace

EvalSummary evaluate_victims(const TeamLearner& learner, const ScenarioConfig& scenario, int episodes,
                             std::uint64_t seed, double gamma) {
  if (episodes < 1) throw std::invalid_argument("evaluate_victims: episodes must be positive");
  const ScenarioConfig& c = learner.team().scenario;
  if (scenario_hash(c) != scenario_hash(scenario)) throw std::invalid_argument("evaluate_victims: scenario mismatch");
  EvalSummary summary;
  summary.episodes = episodes;
  Rng rng(derive_seed(seed, 7));
  for (int ep = 0; ep < episodes; ++ep) {
    WorldState s = reset(c, derive_seed(seed, 100 + static_cast<std::uint64_t>(ep)));
    double discount = 1.0;
    double ret = 0.0;
    while (true) {
      const auto ids = learner.act(s, 0.0, rng);
      StepOutcome out = step(c, s, joint_actions(learner.team(), ids, s));
      ret += discount * out.reward;
      discount *= gamma;
      s = std::move(out.next_state);
      if (out.done) {
        summary.win_rate += out.won ? 1.0 : 0.0;
        summary.allied_deaths += count_dead(s, 0, c.first_enemy());
        break;
      }
    }
    summary.mean_return += ret;
  }
  summary.win_rate /= episodes;
  summary.allied_deaths /= episodes;
  summary.mean_return /= episodes;
  return summary;
}

VictimTrainingResult train_victims(const ScenarioConfig& scenario, LearnerKind kind, std::uint64_t total_steps,
                                   std::uint64_t seed, const LearnerConfig& config,
                                   const VictimTrainingOptions& options) {
  const ScenarioConfig c = without_traitors(scenario);
  validate(c);
  const TeamSpec team = TeamSpec::victims(c);
  VictimTrainingResult result;
  result.learner = make_learner(kind, team, config, derive_seed(seed, 4));
  result.meta = LearnerMeta{scenario_hash(c), seed, total_steps};

  Rng explore(derive_seed(seed, 2));
  const std::uint64_t episode_stream = derive_seed(seed, 1);
  const std::uint64_t eval_seed = derive_seed(seed, 3);
  std::uint64_t episode = 0;
  WorldState s = reset(c, derive_seed(episode_stream, episode));
  auto evaluate_at = [&](std::uint64_t step_count) {
    result.curve.push_back({step_count, evaluate_victims(*result.learner, c, options.eval_episodes, eval_seed,
                                                         config.gamma)});
  };
  for (std::uint64_t t = 0; t < total_steps; ++t) {
    if (config.lr_final >= 0.0) {
      const double frac = static_cast<double>(t) / static_cast<double>(total_steps);
      result.learner->set_learning_rate(config.lr + (config.lr_final - config.lr) * frac);
    }
    const double eps = config.eps.at(static_cast<std::int64_t>(t));
    const auto ids = result.learner->act(s, eps, explore);
    StepOutcome out = step(c, s, joint_actions(team, ids, s));
    ReplayItem item{s, ids, out.reward, out.next_state, out.done};
    result.learner->observe(std::move(item));
    if (out.done) {
      s = reset(c, derive_seed(episode_stream, ++episode));
    } else {
      s = std::move(out.next_state);
    }
    if (options.eval_every > 0 && (t + 1) % static_cast<std::uint64_t>(options.eval_every) == 0 &&
        t + 1 != total_steps) {
      evaluate_at(t + 1);
    }
  }
  evaluate_at(total_steps);
  return result;
}

}  // namespace traitor
