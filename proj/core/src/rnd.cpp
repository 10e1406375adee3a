#include "traitor/rnd.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include "traitor/errors.hpp"
#include "traitor/text_io.hpp"

namespace traitor {

namespace {

std::vector<int> rnd_dims(int input_width, const RndConfig& config) {
  std::vector<int> dims{input_width};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(config.output_dim);
  return dims;
}

double coordinate(int v, int extent) { return extent > 1 ? static_cast<double>(v) / (extent - 1) : 0.0; }

}  // namespace

RndModule RndModule::create(int input_width, std::uint64_t seed, const RndConfig& config) {
  if (input_width < 1) throw std::invalid_argument("RndModule: input width must be positive");
  const auto dims = rnd_dims(input_width, config);
  RndModule m;
  m.target = mlp_init(dims, derive_seed(seed, 21));
  m.predictor = mlp_init(dims, derive_seed(seed, 22));
  m.opt = make_opt_state(m.predictor, Optimizer::adam, config.lr);
  m.input_width = input_width;
  m.include_traitors = config.include_traitors;
  m.seed = seed;
  return m;
}

int trimmed_width(const ScenarioConfig& config, bool include_traitors) {
  return 2 * (config.num_victims + (include_traitors ? config.num_traitors : 0));
}

Vec trim_state(const ScenarioConfig& config, const WorldState& state, bool include_traitors) {
  const int last = include_traitors ? config.first_enemy() : config.num_victims;
  Vec v(2 * last);
  for (int i = 0; i < last; ++i) {
    v(2 * i) = coordinate(state.units[i].x, config.grid_width);
    v(2 * i + 1) = coordinate(state.units[i].y, config.grid_height);
  }
  return v;
}

double novelty(const RndModule& module, const Vec& trimmed) {
  if (trimmed.size() != module.input_width) throw std::invalid_argument("novelty: input length mismatch");
  return (mlp_forward(module.predictor, trimmed) - mlp_forward(module.target, trimmed)).squaredNorm();
}

double rnd_update(RndModule& module, const Vec& trimmed) {
  if (trimmed.size() != module.input_width) throw std::invalid_argument("rnd_update: input length mismatch");
  ForwardTape tape;
  const Mat pred = mlp_forward_batch(module.predictor, trimmed, &tape);
  const Vec target = mlp_forward(module.target, trimmed);
  const auto [loss, grad] = mse_and_grad(pred.col(0), target);
  GradBundle grads = GradBundle::zeros_like(module.predictor);
  mlp_backward_batch(module.predictor, tape, grad, grads);
  opt_step(module.predictor, grads, module.opt);
  return loss;
}

RndModule pretrain_rnd(const TmdpSpec& spec, int episodes, std::uint64_t seed, const RndConfig& config) {
  if (episodes < 0) throw std::invalid_argument("pretrain_rnd: episodes must be non-negative");
  if (!spec.victim_policy) throw StateError("pretrain_rnd: no victim policy loaded");
  const ScenarioConfig& c = spec.scenario;
  RndModule module = RndModule::create(trimmed_width(c, config.include_traitors), seed, config);
  const TraitorPolicy traitors = random_policy(spec);
  Rng rng(derive_seed(seed, 2));
  for (int ep = 0; ep < episodes; ++ep) {
    WorldState s = reset(c, derive_seed(derive_seed(seed, 1), static_cast<std::uint64_t>(ep)));
    rnd_update(module, trim_state(c, s, config.include_traitors));
    while (true) {
      TraitorTransition tr = tmdp_step(spec, s, traitors(s, rng), rng);
      rnd_update(module, trim_state(c, tr.next_state, config.include_traitors));
      if (tr.done) break;
      s = std::move(tr.next_state);
    }
  }
  module.episodes = static_cast<std::uint64_t>(episodes);
  return module;
}

void write_rnd(std::ostream& out, const RndModule& module) {
  out << "RND v1 input_width=" << module.input_width << " episodes=" << module.episodes << " seed=" << module.seed
      << " include_traitors=" << (module.include_traitors ? 1 : 0) << '\n';
  write_mlp(out, module.target);
  write_mlp(out, module.predictor);
}

RndModule read_rnd(std::istream& in, const RndConfig& config) {
  LineReader reader(in);
  const std::string header = reader.expect("RND header");
  const auto fields = split(trim(header), ' ');
  if (fields.size() != 6 || fields[0] != "RND" || fields[1] != "v1") reader.fail("expected 'RND v1 ...' header");
  RndModule m;
  auto value_of = [&](std::string_view field, std::string_view key) {
    if (!field.starts_with(key) || field.size() <= key.size() || field[key.size()] != '=') {
      reader.fail("expected '" + std::string(key) + "='");
    }
    return field.substr(key.size() + 1);
  };
  m.input_width = static_cast<int>(parse_int(value_of(fields[2], "input_width"), reader.line()));
  m.episodes = parse_u64(value_of(fields[3], "episodes"), reader.line());
  m.seed = parse_u64(value_of(fields[4], "seed"), reader.line());
  m.include_traitors = parse_int(value_of(fields[5], "include_traitors"), reader.line()) != 0;
  m.target = read_mlp(reader);
  m.predictor = read_mlp(reader);
  if (m.target.layer_dims != m.predictor.layer_dims) throw std::invalid_argument("RND target/predictor shapes differ");
  if (m.target.input_dim() != m.input_width) throw std::invalid_argument("RND header width does not match networks");
  m.opt = make_opt_state(m.predictor, Optimizer::adam, config.lr);
  return m;
}

}  // namespace traitor
