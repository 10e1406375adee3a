#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "traitor/errors.hpp"
#include "traitor/harness.hpp"
#include "traitor/text_io.hpp"

namespace fs = std::filesystem;
using namespace traitor;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string method;
  std::string traitors;
  std::string suite = "all";
  std::vector<std::string> replays;
  int episodes = -1;
};

RunConfig load(const Options& o) {
  if (o.config.empty()) throw std::invalid_argument("--config is required");
  RunConfig c = load_run_config(o.config);
  if (!o.out.empty()) c.out_dir = o.out;
  if (!o.method.empty() && o.method != "none") c.method = parse_attack_method(o.method);
  if (c.scenario_path.empty()) throw std::invalid_argument("run config does not name a scenario");
  return c;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::string path_in(const RunConfig& c, const std::string& name) { return (fs::path(c.out_dir) / name).string(); }

std::string seed_tag(const std::string& method, std::uint64_t seed) {
  return method + "_seed" + std::to_string(seed);
}

TmdpSpec load_spec(const RunConfig& c, const ScenarioConfig& scenario) {
  auto policy = std::make_shared<VictimPolicy>(load_victim_policy(c.victim_checkpoint_path(), scenario, c.victim_selection));
  return TmdpSpec::create(scenario, std::move(policy), c.gamma);
}

RndModule load_rnd(const RunConfig& c) {
  std::ifstream in(c.rnd_checkpoint_path());
  if (!in) throw std::invalid_argument("method " + to_string(c.method) + " needs an RND checkpoint at '" +
                                       c.rnd_checkpoint_path() + "' (run pretrain-rnd first)");
  return read_rnd(in, c.rnd);
}

int cmd_pretrain_victims(const Options& o) {
  RunConfig c = load(o);
  const std::uint64_t seed = o.seed.value_or(c.victim_seed);
  ensure_dir(c.out_dir);
  VictimTrainingOptions opts;
  opts.eval_every = c.victim_eval_every;
  opts.eval_episodes = c.eval_episodes;
  const VictimTrainingResult r =
      train_victims(c.scenario, c.victim_learner, c.victim_steps, seed, c.victim_config, opts);

  const std::string ckpt = c.victim_checkpoint_path();
  auto out = open_out(ckpt);
  r.learner->write(out, r.meta);
  finish(out, ckpt);

  const std::string metrics = path_in(c, "victims_metrics.csv");
  auto csv = open_out(metrics);
  csv << "step,win_rate,allied_deaths,mean_return\n";
  for (const auto& p : r.curve) {
    csv << p.step << ',' << format_double(p.eval.win_rate) << ',' << format_double(p.eval.allied_deaths) << ','
        << format_double(p.eval.mean_return) << '\n';
  }
  finish(csv, metrics);
  std::printf("victims: %s steps=%llu final win_rate=%.3f -> %s\n", to_string(c.victim_learner).c_str(),
              static_cast<unsigned long long>(c.victim_steps), r.curve.back().eval.win_rate, ckpt.c_str());
  return kExitOk;
}

int cmd_pretrain_rnd(const Options& o) {
  RunConfig c = load(o);
  const std::uint64_t seed = o.seed.value_or(c.seeds.front());
  ensure_dir(c.out_dir);
  const TmdpSpec spec = load_spec(c, c.scenario);
  const RndModule module = pretrain_rnd(spec, c.rnd_episodes, seed, c.rnd);
  const std::string ckpt = c.rnd_checkpoint_path();
  auto out = open_out(ckpt);
  write_rnd(out, module);
  finish(out, ckpt);
  std::printf("rnd: episodes=%d seed=%llu -> %s\n", c.rnd_episodes, static_cast<unsigned long long>(seed),
              ckpt.c_str());
  return kExitOk;
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

int cmd_train_traitors(const Options& o) {
  RunConfig c = load(o);
  if (o.method == "none") throw std::invalid_argument("train-traitors needs an attack method");
  const std::vector<std::uint64_t> seeds = o.seed ? std::vector<std::uint64_t>{*o.seed} : c.seeds;
  ensure_dir(c.out_dir);
  const TmdpSpec spec = load_spec(c, c.scenario);
  const bool needs_rnd = c.method == AttackMethod::rnd_only ||
                         (c.method == AttackMethod::cuda2 && c.potential == PotentialSource::rnd);
  std::optional<RndModule> rnd;
  if (needs_rnd) rnd = load_rnd(c);
  const std::string method = to_string(c.method);

  std::vector<MetricsRow> finals;
  for (const std::uint64_t seed : seeds) {
    const TraitorTrainingResult r = train_traitors(c, spec, rnd ? &*rnd : nullptr, seed);
    const std::string tag = seed_tag(method, seed);

    const std::string metrics = path_in(c, "metrics_" + tag + ".csv");
    auto csv = open_out(metrics);
    csv << kMetricsHeader << '\n';
    for (const auto& row : r.metrics) write_metrics_row(csv, row);
    finish(csv, metrics);

    if (r.learner) {
      const std::string ckpt = path_in(c, "traitors_" + tag + ".ckpt");
      auto out = open_out(ckpt);
      r.learner->write(out, r.meta);
      finish(out, ckpt);

      const std::string res = path_in(c, "residuals_" + tag + ".csv");
      auto rcsv = open_out(res);
      rcsv << "episode,steps,U,U_F,residual\n";
      for (const auto& e : r.residuals) {
        rcsv << e.episode << ',' << e.steps << ',' << format_double(e.U) << ',' << format_double(e.U_F) << ','
             << format_double(e.residual) << '\n';
      }
      finish(rcsv, res);
    }
    const MetricsRow& last = r.metrics.back();
    finals.push_back(last);
    std::printf("%s seed=%llu steps=%llu win_rate=%.3f allied_deaths=%.2f traitor_return=%.2f residual_max=%.3g\n",
                method.c_str(), static_cast<unsigned long long>(seed), static_cast<unsigned long long>(last.step),
                last.win_rate, last.allied_deaths, last.traitor_return, last.shaping_residual_max);
  }

  auto stats = [&](auto field) {
    std::vector<double> xs;
    for (const auto& row : finals) xs.push_back(field(row));
    double mean = 0.0;
    for (const double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    return std::pair{mean, sample_std(xs, mean)};
  };
  const auto win = stats([](const MetricsRow& r) { return r.win_rate; });
  const auto deaths = stats([](const MetricsRow& r) { return r.allied_deaths; });
  const auto ret = stats([](const MetricsRow& r) { return r.traitor_return; });
  const std::string summary = path_in(c, o.seed ? "summary_" + seed_tag(method, *o.seed) + ".csv"
                                                 : "summary_" + method + ".csv");
  auto out = open_out(summary);
  out << "method,seeds,win_rate_mean,win_rate_std,allied_deaths_mean,allied_deaths_std,traitor_return_mean,"
         "traitor_return_std\n"
      << method << ',' << finals.size() << ',' << format_double(win.first) << ',' << format_double(win.second) << ','
      << format_double(deaths.first) << ',' << format_double(deaths.second) << ',' << format_double(ret.first)
      << ',' << format_double(ret.second) << '\n';
  finish(out, summary);
  std::printf("%s over %zu seeds: win_rate %.3f +- %.3f\n", method.c_str(), finals.size(), win.first, win.second);
  return kExitOk;
}

int cmd_evaluate(const Options& o) {
  RunConfig c = load(o);
  const std::uint64_t seed = o.seed.value_or(c.seeds.front());
  const int episodes = o.episodes >= 0 ? o.episodes : c.eval_episodes;
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be positive");
  ensure_dir(c.out_dir);
  const bool baseline = o.method == "none";
  const ScenarioConfig scenario = baseline ? without_traitors(c.scenario) : c.scenario;
  const TmdpSpec spec = load_spec(c, scenario);
  const std::string method = baseline ? "none" : to_string(c.method);

  std::unique_ptr<TeamLearner> learner;
  TraitorPolicy policy;
  std::uint64_t step = 0;
  if (baseline || c.method == AttackMethod::stop) {
    policy = stop_policy(spec);
  } else if (c.method == AttackMethod::random) {
    policy = random_policy(spec);
  } else {
    const std::string path = o.traitors.empty() ? path_in(c, "traitors_" + seed_tag(method, seed) + ".ckpt") : o.traitors;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open traitor checkpoint '" + path + "'");
    LoadedLearner loaded = read_learner(in, TeamSpec::traitors(scenario), c.traitor_config);
    if (loaded.team != Team::traitor) throw std::invalid_argument("checkpoint does not hold a traitor learner");
    if (loaded.meta.scenario_hash != scenario_hash(scenario)) {
      throw std::invalid_argument("traitor checkpoint was trained on a different scenario");
    }
    step = loaded.meta.steps;
    learner = std::move(loaded.learner);
    policy = learner_policy(*learner);
  }

  const std::string tag = seed_tag(method, seed);
  const std::string log_path = path_in(c, "replay_" + tag + ".log");
  auto log_out = open_out(log_path);
  ReplayLogWriter log(log_out);
  const EvalResult e = evaluate_attack(spec, policy, episodes, seed, &log);
  finish(log_out, log_path);

  const std::string eval_path = path_in(c, "eval_" + tag + ".csv");
  auto csv = open_out(eval_path);
  csv << kMetricsHeader << '\n';
  write_metrics_row(csv, {method, seed, step, e.win_rate, e.allied_deaths, e.traitor_return, 0.0});
  finish(csv, eval_path);
  std::printf("%s seed=%llu episodes=%d win_rate=%.3f allied_deaths=%.2f traitor_return=%.2f\n", method.c_str(),
              static_cast<unsigned long long>(seed), episodes, e.win_rate, e.allied_deaths, e.traitor_return);
  return kExitOk;
}

int cmd_heatmap(const Options& o) {
  Options base = o;
  base.method.clear();  // only a file tag here
  RunConfig c = load(base);
  if (o.replays.empty()) throw std::invalid_argument("heatmap: at least one --replay log is required");
  ensure_dir(c.out_dir);
  std::vector<LoggedEpisode> episodes;
  for (const auto& path : o.replays) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open replay log '" + path + "'");
    for (auto& ep : read_replay_log(in)) episodes.push_back(std::move(ep));
  }
  const auto [victims, traitors] = build_heatmaps(c.scenario, episodes);
  const std::string prefix = o.method.empty() ? "heatmap_" : "heatmap_" + o.method + "_";
  for (const HeatmapGrid* grid : {&victims, &traitors}) {
    const std::string path = path_in(c, prefix + grid->team + ".txt");
    auto out = open_out(path);
    write_heatmap(out, *grid);
    finish(out, path);
    std::printf("%s: %zu episodes, %llu unit-steps -> %s\n", grid->team.c_str(), episodes.size(),
                static_cast<unsigned long long>(grid->total()), path.c_str());
  }
  return kExitOk;
}

int cmd_verify(const Options& o) {
  const auto results = run_verify_suite(o.suite, o.seed.value_or(1));
  bool ok = true;
  for (const auto& r : results) {
    const char* status = r.passed ? (r.expected_failure ? "XFAIL" : "PASS") : "FAIL";
    std::printf("%-5s %s: %s\n", status, r.name.c_str(), r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traitor attacks on cooperative multi-agent learners"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* cfg = sub->add_option("--config", o.config, "Run configuration file");
    if (needs_config) cfg->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Seed override");
    sub->add_option("--out", o.out, "Output directory override");
  };

  auto* victims = app.add_subcommand("pretrain-victims", "Train the victim team without traitors");
  common(victims, true);
  auto* rnd = app.add_subcommand("pretrain-rnd", "Pre-train the novelty predictor under random traitors");
  common(rnd, true);
  auto* train = app.add_subcommand("train-traitors", "Train traitors (or run a scripted baseline) per seed");
  common(train, true);
  train->add_option("--method", o.method, "stop, random, minus_r, rnd_only or cuda2");
  auto* eval = app.add_subcommand("evaluate", "Greedy evaluation with replay logs");
  common(eval, true);
  eval->add_option("--method", o.method, "stop, random, minus_r, rnd_only, cuda2 or none (no traitors)");
  eval->add_option("--traitors", o.traitors, "Traitor checkpoint (default: <out>/traitors_<method>_seed<N>.ckpt)");
  eval->add_option("--episodes", o.episodes, "Evaluation episodes (default: eval_episodes)");
  auto* heat = app.add_subcommand("heatmap", "Position heatmaps from replay logs");
  common(heat, true);
  heat->add_option("--replay", o.replays, "Replay log (repeatable)")->required();
  heat->add_option("--method", o.method, "Tag for the output file names");
  auto* verify = app.add_subcommand("verify", "Run the certification suites");
  verify->add_option("--suite", o.suite, "invariance, counterexample, gradients, telescoping or all");
  verify->add_option("--seed", o.seed, "Seed for randomized instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*victims) return cmd_pretrain_victims(o);
    if (*rnd) return cmd_pretrain_rnd(o);
    if (*train) return cmd_train_traitors(o);
    if (*eval) return cmd_evaluate(o);
    if (*heat) return cmd_heatmap(o);
    return cmd_verify(o);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
}
