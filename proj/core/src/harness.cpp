#include "traitor/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "traitor/errors.hpp"
#include "traitor/oracle.hpp"
#include "traitor/text_io.hpp"

namespace traitor {

std::string to_string(AttackMethod method) {
  switch (method) {
    case AttackMethod::stop: return "stop";
    case AttackMethod::random: return "random";
    case AttackMethod::minus_r: return "minus_r";
    case AttackMethod::rnd_only: return "rnd_only";
    case AttackMethod::cuda2: return "cuda2";
  }
  return "cuda2";
}

AttackMethod parse_attack_method(std::string_view name) {
  for (const AttackMethod m : {AttackMethod::stop, AttackMethod::random, AttackMethod::minus_r,
                               AttackMethod::rnd_only, AttackMethod::cuda2}) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown attack method '" + std::string(name) + "'");
}

bool is_learned(AttackMethod method) { return method != AttackMethod::stop && method != AttackMethod::random; }

// ---------------------------------------------------------------------------
// Run configuration

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
  return join_path(base_dir, path);
}

std::vector<std::string_view> comma_list(std::string_view text) {
  std::vector<std::string_view> out;
  for (const auto part : split(text, ',')) {
    const auto item = trim(part);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Applies one learner key; false when the key is not a learner key.
bool apply_learner_key(LearnerConfig& c, const std::string& key, const std::string& value, int line) {
  auto as_int = [&] {
    const long long v = parse_int(value, line);
    if (v < 0 || v > 1000000000) throw ParseError(line, "'" + key + "' out of range");
    return static_cast<int>(v);
  };
  if (key == "hidden") {
    c.hidden.clear();
    for (const auto item : comma_list(value)) {
      const long long v = parse_int(item, line);
      if (v < 1) throw ParseError(line, "hidden widths must be positive");
      c.hidden.push_back(static_cast<int>(v));
    }
  } else if (key == "lr") {
    c.lr = parse_double(value, line);
  } else if (key == "lr_final") {
    c.lr_final = parse_double(value, line);
  } else if (key == "batch_size") {
    c.batch_size = std::max(1, as_int());
  } else if (key == "replay_capacity") {
    c.replay_capacity = std::max(1, as_int());
  } else if (key == "eps_start") {
    c.eps.eps_start = parse_double(value, line);
  } else if (key == "eps_end") {
    c.eps.eps_end = parse_double(value, line);
  } else if (key == "eps_decay") {
    c.eps.decay_steps = as_int();
  } else if (key == "target_sync_every") {
    c.target_sync_every = as_int();
  } else if (key == "train_every") {
    c.train_every = std::max(1, as_int());
  } else if (key == "learning_starts") {
    c.learning_starts = as_int();
  } else if (key == "reward_scale") {
    c.reward_scale = parse_double(value, line);
  } else if (key == "grad_clip") {
    c.grad_clip = parse_double(value, line);
  } else if (key == "double_q") {
    c.double_q = parse_int(value, line) != 0;
  } else if (key == "mixer_embed") {
    c.mixer_embed = std::max(1, as_int());
  } else if (key == "tabular_alpha") {
    c.tabular_alpha = parse_double(value, line);
  } else {
    return false;
  }
  return true;
}

void write_learner_keys(std::ostream& out, const std::string& prefix, const LearnerConfig& c) {
  out << prefix << "hidden = ";
  for (std::size_t i = 0; i < c.hidden.size(); ++i) out << (i ? "," : "") << c.hidden[i];
  out << '\n'
      << prefix << "lr = " << format_double(c.lr) << '\n'
      << prefix << "lr_final = " << format_double(c.lr_final) << '\n'
      << prefix << "batch_size = " << c.batch_size << '\n'
      << prefix << "replay_capacity = " << c.replay_capacity << '\n'
      << prefix << "eps_start = " << format_double(c.eps.eps_start) << '\n'
      << prefix << "eps_end = " << format_double(c.eps.eps_end) << '\n'
      << prefix << "eps_decay = " << c.eps.decay_steps << '\n'
      << prefix << "target_sync_every = " << c.target_sync_every << '\n'
      << prefix << "train_every = " << c.train_every << '\n'
      << prefix << "learning_starts = " << c.learning_starts << '\n'
      << prefix << "reward_scale = " << format_double(c.reward_scale) << '\n'
      << prefix << "grad_clip = " << format_double(c.grad_clip) << '\n'
      << prefix << "double_q = " << (c.double_q ? 1 : 0) << '\n'
      << prefix << "mixer_embed = " << c.mixer_embed << '\n'
      << prefix << "tabular_alpha = " << format_double(c.tabular_alpha) << '\n';
}

}  // namespace

std::string RunConfig::victim_checkpoint_path() const {
  return victim_checkpoint.empty() ? join_path(out_dir, "victims.ckpt") : victim_checkpoint;
}

std::string RunConfig::rnd_checkpoint_path() const {
  return rnd_checkpoint.empty() ? join_path(out_dir, "rnd.ckpt") : rnd_checkpoint;
}

RunConfig parse_run_config(std::istream& in, const std::string& base_dir) {
  const KeyValueMap kv = parse_key_values(in);
  RunConfig c;
  // Shared learner keys first so team-prefixed keys can override them.
  for (const auto& [key, entry] : kv) {
    if (key.find('.') != std::string::npos) continue;
    if (apply_learner_key(c.victim_config, key, entry.value, entry.line)) {
      apply_learner_key(c.traitor_config, key, entry.value, entry.line);
    }
  }
  for (const auto& [key, entry] : kv) {
    const std::string& v = entry.value;
    const int line = entry.line;
    auto as_count = [&] {
      const long long x = parse_int(v, line);
      if (x < 0) throw ParseError(line, "'" + key + "' must be non-negative");
      return x;
    };
    try {
      if (key.starts_with("victim.")) {
        if (!apply_learner_key(c.victim_config, key.substr(7), v, line)) throw ParseError(line, "unknown key '" + key + "'");
      } else if (key.starts_with("traitor.")) {
        if (!apply_learner_key(c.traitor_config, key.substr(8), v, line)) throw ParseError(line, "unknown key '" + key + "'");
      } else if (key == "scenario") {
        c.scenario_path = resolve(base_dir, v);
        c.scenario = load_scenario(c.scenario_path);
      } else if (key == "method") {
        c.method = parse_attack_method(v);
      } else if (key == "learner") {
        c.victim_learner = c.traitor_learner = parse_learner_kind(v);
      } else if (key == "victim_learner") {
        c.victim_learner = parse_learner_kind(v);
      } else if (key == "traitor_learner") {
        c.traitor_learner = parse_learner_kind(v);
      } else if (key == "seeds") {
        c.seeds.clear();
        for (const auto item : comma_list(v)) c.seeds.push_back(parse_u64(item, line));
        if (c.seeds.empty()) throw ParseError(line, "seeds must not be empty");
      } else if (key == "victim_seed") {
        c.victim_seed = parse_u64(v, line);
      } else if (key == "victim_steps") {
        c.victim_steps = parse_u64(v, line);
      } else if (key == "victim_eval_every") {
        c.victim_eval_every = static_cast<int>(as_count());
      } else if (key == "rnd_episodes") {
        c.rnd_episodes = static_cast<int>(as_count());
      } else if (key == "traitor_episodes") {
        c.traitor_episodes = static_cast<int>(as_count());
      } else if (key == "traitor_eval_every") {
        c.traitor_eval_every = static_cast<int>(as_count());
      } else if (key == "eval_episodes") {
        c.eval_episodes = static_cast<int>(as_count());
      } else if (key == "gamma") {
        c.gamma = parse_double(v, line);
        if (!(c.gamma >= 0.0 && c.gamma < 1.0)) throw ParseError(line, "gamma must lie in [0, 1)");
      } else if (key == "rnd_lr") {
        c.rnd.lr = parse_double(v, line);
      } else if (key == "rnd_hidden") {
        c.rnd.hidden.clear();
        for (const auto item : comma_list(v)) c.rnd.hidden.push_back(static_cast<int>(parse_int(item, line)));
      } else if (key == "rnd_output") {
        c.rnd.output_dim = static_cast<int>(as_count());
      } else if (key == "rnd_include_traitors") {
        c.rnd.include_traitors = parse_int(v, line) != 0;
      } else if (key == "rnd_scale") {
        c.rnd_scale = parse_double(v, line);
      } else if (key == "potential_timing") {
        if (v != "strict" && v != "frozen") throw ParseError(line, "potential_timing must be strict or frozen");
        c.timing = v == "strict" ? PotentialTiming::strict : PotentialTiming::frozen;
      } else if (key == "potential") {
        if (v != "rnd" && v != "zero") throw ParseError(line, "potential must be rnd or zero");
        c.potential = v == "rnd" ? PotentialSource::rnd : PotentialSource::zero;
      } else if (key == "victim_selection") {
        if (v != "greedy" && v != "sample") throw ParseError(line, "victim_selection must be greedy or sample");
        c.victim_selection = v == "greedy" ? VictimSelection::greedy : VictimSelection::sample;
      } else if (key == "victim_checkpoint") {
        c.victim_checkpoint = resolve(base_dir, v);
      } else if (key == "rnd_checkpoint") {
        c.rnd_checkpoint = resolve(base_dir, v);
      } else if (key == "out") {
        c.out_dir = resolve(base_dir, v);
      } else if (!apply_learner_key(c.victim_config, key, v, line)) {
        throw ParseError(line, "unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument& e) {
      throw ParseError(line, e.what());
    }
  }
  c.victim_config.gamma = c.gamma;
  c.traitor_config.gamma = c.gamma;
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run config '" + path + "'");
  const auto parent = std::filesystem::path(path).parent_path().string();
  return parse_run_config(in, parent.empty() ? "." : parent);
}

std::string write_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << "# scenario\n" << write_scenario(c.scenario) << "# run\n";
  if (!c.scenario_path.empty()) out << "scenario_path = " << c.scenario_path << '\n';
  out << "method = " << to_string(c.method) << '\n'
      << "victim_learner = " << to_string(c.victim_learner) << '\n'
      << "traitor_learner = " << to_string(c.traitor_learner) << '\n'
      << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) out << (i ? "," : "") << c.seeds[i];
  out << '\n'
      << "victim_seed = " << c.victim_seed << '\n'
      << "victim_steps = " << c.victim_steps << '\n'
      << "victim_eval_every = " << c.victim_eval_every << '\n'
      << "rnd_episodes = " << c.rnd_episodes << '\n'
      << "traitor_episodes = " << c.traitor_episodes << '\n'
      << "traitor_eval_every = " << c.traitor_eval_every << '\n'
      << "eval_episodes = " << c.eval_episodes << '\n'
      << "gamma = " << format_double(c.gamma) << '\n'
      << "rnd_lr = " << format_double(c.rnd.lr) << '\n'
      << "rnd_output = " << c.rnd.output_dim << '\n'
      << "rnd_include_traitors = " << (c.rnd.include_traitors ? 1 : 0) << '\n'
      << "rnd_scale = " << format_double(c.rnd_scale) << '\n'
      << "potential_timing = " << (c.timing == PotentialTiming::strict ? "strict" : "frozen") << '\n'
      << "potential = " << (c.potential == PotentialSource::rnd ? "rnd" : "zero") << '\n'
      << "victim_selection = " << (c.victim_selection == VictimSelection::greedy ? "greedy" : "sample") << '\n';
  write_learner_keys(out, "victim.", c.victim_config);
  write_learner_keys(out, "traitor.", c.traitor_config);
  return out.str();
}

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
  out << r.method << ',' << r.seed << ',' << r.step << ',' << format_double(r.win_rate) << ','
      << format_double(r.allied_deaths) << ',' << format_double(r.traitor_return) << ','
      << format_double(r.shaping_residual_max) << '\n';
}

// ---------------------------------------------------------------------------
// Replay logs

void ReplayLogWriter::begin_episode(std::uint64_t reset_seed, int units) {
  out_ << "# replay v1 seed=" << reset_seed << " units=" << units << '\n' << "t,actions,reward,done\n";
}

void ReplayLogWriter::log_step(int t, std::span<const AgentAction> actions, double reward, bool done) {
  out_ << t << ',';
  for (std::size_t i = 0; i < actions.size(); ++i) out_ << (i ? ";" : "") << action_token(actions[i]);
  out_ << ',' << format_double(reward) << ',' << (done ? 1 : 0) << '\n';
}

std::vector<LoggedEpisode> read_replay_log(std::istream& in) {
  LineReader reader(in);
  std::vector<LoggedEpisode> episodes;
  std::string line;
  bool expect_columns = false;
  while (reader.next(line)) {
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    if (view.starts_with("#")) {
      const auto f = split(view, ' ');
      if (f.size() != 5 || f[1] != "replay" || f[2] != "v1" || !f[3].starts_with("seed=") ||
          !f[4].starts_with("units=")) {
        reader.fail("expected '# replay v1 seed=<n> units=<n>'");
      }
      LoggedEpisode ep;
      ep.reset_seed = parse_u64(f[3].substr(5), reader.line());
      const long long units = parse_int(f[4].substr(6), reader.line());
      if (units < 1 || units > 100000) reader.fail("unit count out of range");
      ep.units = static_cast<int>(units);
      episodes.push_back(std::move(ep));
      expect_columns = true;
      continue;
    }
    if (expect_columns) {
      if (view != "t,actions,reward,done") reader.fail("expected column header 't,actions,reward,done'");
      expect_columns = false;
      continue;
    }
    if (episodes.empty()) reader.fail("step row before any episode header");
    LoggedEpisode& ep = episodes.back();
    if (!ep.dones.empty() && ep.dones.back()) reader.fail("step row after the episode ended");
    const auto cols = split(view, ',');
    if (cols.size() != 4) reader.fail("expected 4 columns");
    if (parse_int(cols[0], reader.line()) != static_cast<long long>(ep.actions.size())) {
      reader.fail("timesteps are not contiguous");
    }
    const auto tokens = split(cols[1], ';');
    if (static_cast<int>(tokens.size()) != ep.units) reader.fail("wrong number of actions");
    std::vector<AgentAction> actions;
    for (const auto token : tokens) actions.push_back(parse_action_token(token, reader.line()));
    ep.actions.push_back(std::move(actions));
    ep.rewards.push_back(parse_double(cols[2], reader.line()));
    const long long done = parse_int(cols[3], reader.line());
    if (done != 0 && done != 1) reader.fail("done must be 0 or 1");
    ep.dones.push_back(static_cast<std::uint8_t>(done));
  }
  if (expect_columns) reader.fail("missing column header");
  return episodes;
}

// ---------------------------------------------------------------------------
// Evaluation and traitor training

EvalResult evaluate_attack(const TmdpSpec& spec, const TraitorPolicy& traitors, int episodes, std::uint64_t seed,
                           ReplayLogWriter* log) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be positive");
  const ScenarioConfig& c = spec.scenario;
  EvalResult result;
  result.episodes = episodes;
  Rng rng(derive_seed(seed, 7));
  for (int ep = 0; ep < episodes; ++ep) {
    const std::uint64_t reset_seed = derive_seed(seed, 100 + static_cast<std::uint64_t>(ep));
    WorldState s = reset(c, reset_seed);
    if (log) log->begin_episode(reset_seed, c.num_units());
    double discount = 1.0;
    double ret = 0.0;
    while (true) {
      const auto ids = traitors(s, rng);
      TraitorTransition tr = tmdp_step(spec, s, ids, rng);
      if (log) log->log_step(tr.t, tr.joint_actions, tr.r_victim, tr.done);
      ret += discount * tr.r_traitor;
      discount *= spec.gamma;
      s = std::move(tr.next_state);
      if (tr.done) {
        result.win_rate += tr.won ? 1.0 : 0.0;
        for (int i = 0; i < c.first_enemy(); ++i) result.allied_deaths += s.units[i].alive ? 0.0 : 1.0;
        break;
      }
    }
    result.traitor_return += ret;
  }
  result.win_rate /= episodes;
  result.allied_deaths /= episodes;
  result.traitor_return /= episodes;
  return result;
}

TraitorTrainingResult train_traitors(const RunConfig& cfg, const TmdpSpec& spec, const RndModule* rnd,
                                     std::uint64_t seed) {
  const ScenarioConfig& c = spec.scenario;
  if (cfg.eval_episodes < 1) throw std::invalid_argument("train_traitors: eval_episodes must be positive");
  TraitorTrainingResult result;
  const std::uint64_t eval_seed = derive_seed(seed, 3);
  auto row = [&](const TraitorPolicy& policy, std::uint64_t step, double residual_max) {
    const EvalResult e = evaluate_attack(spec, policy, cfg.eval_episodes, eval_seed);
    result.metrics.push_back(
        {to_string(cfg.method), seed, step, e.win_rate, e.allied_deaths, e.traitor_return, residual_max});
  };
  if (!is_learned(cfg.method)) {
    row(cfg.method == AttackMethod::stop ? stop_policy(spec) : random_policy(spec), 0, 0.0);
    return result;
  }
  if (c.num_traitors < 1) throw std::invalid_argument("train_traitors: scenario has no traitors");

  const bool rnd_potential = cfg.method == AttackMethod::cuda2 && cfg.potential == PotentialSource::rnd;
  const bool uses_rnd = rnd_potential || cfg.method == AttackMethod::rnd_only;
  std::optional<RndModule> module;
  if (uses_rnd) {
    if (rnd == nullptr) throw std::invalid_argument("train_traitors: " + to_string(cfg.method) + " needs an RND checkpoint");
    if (rnd->input_width != trimmed_width(c, rnd->include_traitors)) {
      throw std::invalid_argument("train_traitors: RND checkpoint does not match the scenario");
    }
    module = *rnd;
    module->opt = make_opt_state(module->predictor, Optimizer::adam, cfg.rnd.lr);
  }
  const bool include = module ? module->include_traitors : false;
  auto potential = [&](const WorldState& w) {
    return rnd_potential ? cfg.rnd_scale * novelty(*module, trim_state(c, w, include)) : 0.0;
  };

  const TeamSpec team = TeamSpec::traitors(c);
  result.learner = make_learner(cfg.traitor_learner, team, cfg.traitor_config, derive_seed(seed, 4));
  Rng explore(derive_seed(seed, 2));
  Rng env_rng(derive_seed(seed, 5));
  const std::uint64_t episode_stream = derive_seed(seed, 1);
  double residual_window = 0.0;
  std::uint64_t steps = 0;
  const TraitorPolicy greedy = learner_policy(*result.learner);

  const LearnerConfig& lc = cfg.traitor_config;
  for (int ep = 0; ep < cfg.traitor_episodes; ++ep) {
    if (lc.lr_final >= 0.0) {
      const double frac = static_cast<double>(ep) / static_cast<double>(cfg.traitor_episodes);
      result.learner->set_learning_rate(lc.lr + (lc.lr_final - lc.lr) * frac);
    }
    WorldState s = reset(c, derive_seed(episode_stream, static_cast<std::uint64_t>(ep)));
    double phi_s = potential(s);
    std::vector<ShapedTransition> episode;
    while (true) {
      const double eps = cfg.traitor_config.eps.at(static_cast<std::int64_t>(steps));
      const std::vector<int> ids = result.learner->act(s, eps, explore);
      TraitorTransition tr = tmdp_step(spec, s, ids, env_rng);
      double phi_next = 0.0;
      double bonus = 0.0;
      if (rnd_potential) {
        // Both endpoint potentials are logged; phi_s was read before this step's update.
        if (cfg.timing == PotentialTiming::frozen && !tr.done) phi_next = potential(tr.next_state);
        rnd_update(*module, trim_state(c, s, include));
        if (cfg.timing == PotentialTiming::strict && !tr.done) phi_next = potential(tr.next_state);
      } else if (cfg.method == AttackMethod::rnd_only) {
        bonus = cfg.rnd_scale * novelty(*module, trim_state(c, tr.next_state, include));
        rnd_update(*module, trim_state(c, s, include));
      }
      const bool done = tr.done;
      ReplayItem item{s, ids, 0.0, tr.next_state, done};
      ShapedTransition st = shape_with_potentials(std::move(tr), phi_s, phi_next, cfg.gamma);
      item.reward = cfg.method == AttackMethod::rnd_only ? st.base.r_traitor + bonus : st.r_shaped;
      result.learner->observe(std::move(item));
      phi_s = st.phi_s_next;
      ++steps;
      s = st.base.next_state;
      st.base.state = WorldState{};
      st.base.next_state = WorldState{};
      episode.push_back(std::move(st));
      if (cfg.traitor_eval_every > 0 && steps % static_cast<std::uint64_t>(cfg.traitor_eval_every) == 0) {
        row(greedy, steps, residual_window);
        residual_window = 0.0;
      }
      if (done) break;
    }
    const ShapedReturn sr = shaped_return(episode, cfg.gamma);
    result.residuals.push_back({static_cast<std::uint64_t>(ep), static_cast<int>(episode.size()), sr.U, sr.U_F,
                                sr.residual});
    residual_window = std::max(residual_window, std::abs(sr.residual));
  }
  if (result.metrics.empty() || result.metrics.back().step != steps) row(greedy, steps, residual_window);
  result.steps = steps;
  result.meta = LearnerMeta{scenario_hash(c), seed, steps};
  return result;
}

// ---------------------------------------------------------------------------
// Heatmaps

std::uint64_t HeatmapGrid::total() const {
  std::uint64_t sum = 0;
  for (const auto v : counts) sum += v;
  return sum;
}

std::pair<HeatmapGrid, HeatmapGrid> build_heatmaps(const ScenarioConfig& c, std::span<const LoggedEpisode> episodes) {
  HeatmapGrid victims{c.grid_width, c.grid_height, "victim",
                      std::vector<std::uint64_t>(static_cast<std::size_t>(c.grid_width) * c.grid_height, 0)};
  HeatmapGrid traitors = victims;
  traitors.team = "traitor";
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const LoggedEpisode& ep = episodes[e];
    if (ep.units != c.num_units()) throw std::invalid_argument("heatmap: replay unit count does not match scenario");
    WorldState s = reset(c, ep.reset_seed);
    for (std::size_t t = 0; t < ep.actions.size(); ++t) {
      for (int i = 0; i < c.first_enemy(); ++i) {
        const Unit& u = s.units[i];
        if (!u.alive) continue;
        HeatmapGrid& grid = u.team == Team::traitor ? traitors : victims;
        ++grid.counts[static_cast<std::size_t>(u.y) * c.grid_width + u.x];
      }
      StepOutcome out = step(c, s, ep.actions[t]);
      if (out.reward != ep.rewards[t] || out.done != (ep.dones[t] != 0)) {
        throw std::invalid_argument("heatmap: replay of episode " + std::to_string(e) + " diverges at t=" +
                                    std::to_string(t));
      }
      s = std::move(out.next_state);
    }
  }
  return {std::move(victims), std::move(traitors)};
}

void write_heatmap(std::ostream& out, const HeatmapGrid& grid) {
  out << grid.width << ' ' << grid.height << '\n' << grid.team << '\n';
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) out << (x ? " " : "") << grid.at(x, y);
    out << '\n';
  }
}

HeatmapGrid read_heatmap(std::istream& in) {
  LineReader reader(in);
  HeatmapGrid grid;
  const std::string dims = reader.expect("heatmap size");
  const auto f = split(trim(dims), ' ');
  if (f.size() != 2) reader.fail("expected '<width> <height>'");
  grid.width = static_cast<int>(parse_int(f[0], reader.line()));
  grid.height = static_cast<int>(parse_int(f[1], reader.line()));
  if (grid.width < 1 || grid.height < 1 || grid.width > 100000 || grid.height > 100000) reader.fail("bad grid size");
  grid.team = std::string(trim(reader.expect("team tag")));
  for (int y = 0; y < grid.height; ++y) {
    const std::string row = reader.expect("heatmap row");
    const auto cells = split(trim(row), ' ');
    if (static_cast<int>(cells.size()) != grid.width) reader.fail("heatmap row has wrong length");
    for (const auto cell : cells) grid.counts.push_back(parse_u64(cell, reader.line()));
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Verification suites

namespace {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / scale;
}

// Central differences of `loss` against every entry of `params`, compared with `grads`.
double max_gradient_error(MlpParams& params, const GradBundle& grads, const std::function<double()>& loss) {
  constexpr double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](double& value, double analytic) {
    const double saved = value;
    value = saved + h;
    const double up = loss();
    value = saved - h;
    const double down = loss();
    value = saved;
    worst = std::max(worst, relative_error(analytic, (up - down) / (2 * h)));
  };
  for (int k = 0; k < params.num_layers(); ++k) {
    for (Eigen::Index i = 0; i < params.weights[k].size(); ++i) {
      probe(params.weights[k].data()[i], grads.weights[k].data()[i]);
    }
    for (Eigen::Index i = 0; i < params.biases[k].size(); ++i) probe(params.biases[k](i), grads.biases[k](i));
  }
  return worst;
}

// A small combat scenario and a batch of transitions gathered under random play.
std::vector<ReplayItem> random_batch(const ScenarioConfig& c, const TeamSpec& team, int count, Rng& rng) {
  std::vector<ReplayItem> batch;
  WorldState s = reset(c, rng.next_u64());
  while (static_cast<int>(batch.size()) < count) {
    std::vector<AgentAction> joint(c.num_units(), AgentAction::noop());
    std::vector<int> ids(team.num_agents(), 0);
    for (int i = 0; i < c.first_enemy(); ++i) {
      if (!s.units[i].alive) continue;
      const auto legal = legal_actions(c, s, i);
      joint[i] = legal[rng.below(static_cast<int>(legal.size()))];
    }
    for (int k = 0; k < team.num_agents(); ++k) ids[k] = action_id(c, team.team, joint[team.units[k]]);
    const auto enemy = scripted_enemy_policy(c, s);
    std::copy(enemy.begin(), enemy.end(), joint.begin() + c.first_enemy());
    StepOutcome out = step(c, s, joint);
    batch.push_back({s, ids, out.reward, out.next_state, out.done});
    s = out.done ? reset(c, rng.next_u64()) : std::move(out.next_state);
  }
  return batch;
}

VerifyResult verify_invariance_sweep(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 31));
  int passed = 0;
  double worst = 0.0;
  constexpr int kCount = 100;
  for (int i = 0; i < kCount; ++i) {
    const FiniteMdp m = random_mdp(rng);
    const auto phi = random_potential(rng, m.num_states);
    const InvarianceReport r = verify_invariance(m, phi, true);
    worst = std::max(worst, r.q_residual_max);
    if (r.q_residual_max < 1e-6 && r.greedy_sets_equal) ++passed;
  }
  return {"invariance", passed == kCount, false,
          std::to_string(passed) + "/" + std::to_string(kCount) + " random MDPs, max |Q' - (Q - phi)| = " +
              format_double(worst)};
}

std::vector<VerifyResult> verify_counterexample() {
  const Counterexample ce = terminal_counterexample();
  const InvarianceReport off = verify_invariance(ce.mdp, ce.phi, false);
  const InvarianceReport on = verify_invariance(ce.mdp, ce.phi, true);
  return {
      {"counterexample/terminal_zero_off", !off.greedy_sets_equal, true,
       off.greedy_sets_equal ? "greedy policy unchanged (unexpected)" : "greedy policy flips (expected failure)"},
      {"counterexample/terminal_zero_on", on.greedy_sets_equal && on.q_residual_max < 1e-6, false,
       "max residual " + format_double(on.q_residual_max)},
  };
}

std::vector<VerifyResult> verify_gradients(std::uint64_t seed) {
  std::vector<VerifyResult> out;
  Rng rng(derive_seed(seed, 41));
  {
    MlpParams net = mlp_init({8, 16, 16, 4}, derive_seed(seed, 42));
    Vec x(8);
    Vec up(4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1.0, 1.0);
    for (Eigen::Index i = 0; i < up.size(); ++i) up(i) = rng.uniform(-1.0, 1.0);
    const GradBundle g = mlp_backward(net, x, up);
    const double err = max_gradient_error(net, g, [&] { return up.dot(mlp_forward(net, x)); });
    out.push_back({"gradients/mlp", err < 1e-4, false, "max relative error " + format_double(err)});
  }
  ScenarioConfig c;
  c.grid_width = 8;
  c.grid_height = 4;
  c.num_victims = 2;
  c.num_enemies = 2;
  c.max_health = 3;
  c.max_steps = 12;
  const TeamSpec team = TeamSpec::victims(c);
  const auto items = random_batch(c, team, 8, rng);
  std::vector<const ReplayItem*> batch;
  for (const auto& item : items) batch.push_back(&item);
  LearnerConfig lc;
  lc.hidden = {8, 8};
  lc.mixer_embed = 4;
  for (const LearnerKind kind : {LearnerKind::vdn, LearnerKind::qmix_lite}) {
    ValueLearner learner(kind, team, lc, derive_seed(seed, 43));
    LearnerGrads grads;
    learner.loss_and_grads(batch, &grads);
    auto loss = [&] { return learner.loss_and_grads(batch, nullptr); };
    double err = max_gradient_error(learner.agent_net(), grads.agent, loss);
    if (kind == LearnerKind::qmix_lite) {
      auto nets = learner.mixer().nets();
      for (std::size_t k = 0; k < nets.size(); ++k) err = std::max(err, max_gradient_error(*nets[k], grads.mixer[k], loss));
    }
    out.push_back({"gradients/" + to_string(kind) + "_loss", err < 1e-4, false,
                   "max relative error " + format_double(err)});
  }
  return out;
}

VerifyResult verify_telescoping(std::uint64_t seed) {
  // A drifting RND potential over random walks on a small board; the predictor
  // trains on every visited state while potentials are carried forward.
  ScenarioConfig c;
  c.grid_width = 8;
  c.grid_height = 5;
  c.num_victims = 2;
  c.num_traitors = 1;
  c.num_enemies = 2;
  c.max_health = 3;
  c.max_steps = 20;
  const TmdpSpec spec = TmdpSpec::create(c, std::make_shared<VictimPolicy>(VictimPolicy::uniform()), 0.95);
  RndConfig rc;
  rc.hidden = {32, 32};
  rc.output_dim = 16;
  RndModule module = RndModule::create(trimmed_width(c), derive_seed(seed, 51), rc);
  Rng rng(derive_seed(seed, 52));
  const TraitorPolicy traitors = random_policy(spec);
  double worst = 0.0;
  constexpr int kEpisodes = 50;
  for (int ep = 0; ep < kEpisodes; ++ep) {
    WorldState s = reset(c, derive_seed(seed, 600 + static_cast<std::uint64_t>(ep)));
    double phi_s = novelty(module, trim_state(c, s));
    std::vector<ShapedTransition> episode;
    while (true) {
      TraitorTransition tr = tmdp_step(spec, s, traitors(s, rng), rng);
      rnd_update(module, trim_state(c, s));
      const double phi_next = tr.done ? 0.0 : novelty(module, trim_state(c, tr.next_state));
      episode.push_back(shape_with_potentials(tr, phi_s, phi_next, spec.gamma));
      phi_s = phi_next;
      if (tr.done) break;
      s = std::move(tr.next_state);
    }
    worst = std::max(worst, std::abs(shaped_return(episode, spec.gamma).residual));
  }
  return {"telescoping", worst < 1e-9, false,
          std::to_string(kEpisodes) + " episodes, max |residual| = " + format_double(worst)};
}

}  // namespace

std::vector<VerifyResult> run_verify_suite(const std::string& suite, std::uint64_t seed) {
  const bool all = suite == "all";
  if (!all && suite != "invariance" && suite != "counterexample" && suite != "gradients" && suite != "telescoping") {
    throw std::invalid_argument("unknown verify suite '" + suite + "'");
  }
  std::vector<VerifyResult> results;
  if (all || suite == "invariance") results.push_back(verify_invariance_sweep(seed));
  if (all || suite == "counterexample") {
    for (auto& r : verify_counterexample()) results.push_back(std::move(r));
  }
  if (all || suite == "gradients") {
    for (auto& r : verify_gradients(seed)) results.push_back(std::move(r));
  }
  if (all || suite == "telescoping") results.push_back(verify_telescoping(seed));
  return results;
}

}  // namespace traitor
