#include "traitor/nnet.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "traitor/rng.hpp"
#include "traitor/text_io.hpp"

namespace traitor {
namespace {

void check_shapes(const MlpParams& params, const GradBundle& grads, const char* where) {
  if (!grads.matches(params)) throw std::invalid_argument(std::string(where) + ": gradient shape mismatch");
}

void apply_activation(Activation act, Mat& values) {
  if (act == Activation::relu) values = values.cwiseMax(0.0);
}

}  // namespace

std::size_t MlpParams::num_parameters() const {
  std::size_t n = 0;
  for (int k = 0; k < num_layers(); ++k) n += weights[k].size() + biases[k].size();
  return n;
}

GradBundle GradBundle::zeros_like(const MlpParams& params) {
  GradBundle g;
  g.weights.reserve(params.weights.size());
  g.biases.reserve(params.biases.size());
  for (int k = 0; k < params.num_layers(); ++k) {
    g.weights.push_back(Mat::Zero(params.weights[k].rows(), params.weights[k].cols()));
    g.biases.push_back(Vec::Zero(params.biases[k].size()));
  }
  return g;
}

GradBundle& GradBundle::operator+=(const GradBundle& other) {
  if (other.weights.size() != weights.size()) throw std::invalid_argument("GradBundle: layer count mismatch");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k].rows() != other.weights[k].rows() || weights[k].cols() != other.weights[k].cols() ||
        biases[k].size() != other.biases[k].size()) {
      throw std::invalid_argument("GradBundle: shape mismatch");
    }
    weights[k] += other.weights[k];
    biases[k] += other.biases[k];
  }
  return *this;
}

GradBundle& GradBundle::operator*=(double factor) {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    weights[k] *= factor;
    biases[k] *= factor;
  }
  return *this;
}

double GradBundle::squared_norm() const {
  double total = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    total += weights[k].squaredNorm() + biases[k].squaredNorm();
  }
  return total;
}

bool GradBundle::matches(const MlpParams& params) const {
  if (weights.size() != params.weights.size() || biases.size() != params.biases.size()) return false;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k].rows() != params.weights[k].rows() || weights[k].cols() != params.weights[k].cols() ||
        biases[k].size() != params.biases[k].size()) {
      return false;
    }
  }
  return true;
}

OptState make_opt_state(const MlpParams& params, Optimizer kind, double lr) {
  if (!(lr >= 0.0)) throw std::invalid_argument("make_opt_state: learning rate must be non-negative");
  OptState state;
  state.kind = kind;
  state.lr = lr;
  if (kind == Optimizer::adam) {
    state.first_moment = GradBundle::zeros_like(params);
    state.second_moment = GradBundle::zeros_like(params);
  }
  return state;
}

MlpParams mlp_init(std::span<const int> layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw std::invalid_argument("mlp_init: need at least input and output dims");
  for (const int d : layer_dims) {
    if (d < 1) throw std::invalid_argument("mlp_init: dims must be positive");
  }
  MlpParams params;
  params.layer_dims.assign(layer_dims.begin(), layer_dims.end());
  Rng rng(seed);
  const std::size_t layers = layer_dims.size() - 1;
  for (std::size_t k = 0; k < layers; ++k) {
    const int fan_in = layer_dims[k];
    const int fan_out = layer_dims[k + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Mat w(fan_out, fan_in);
    // Row-major fill order keeps the draw sequence independent of Eigen's storage order.
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-bound, bound);
    }
    params.weights.push_back(std::move(w));
    params.biases.push_back(Vec::Zero(fan_out));
    params.activations.push_back(k + 1 == layers ? Activation::identity : Activation::relu);
  }
  return params;
}

Vec mlp_forward(const MlpParams& params, const Vec& input) {
  if (input.size() != params.input_dim()) throw std::invalid_argument("mlp_forward: input length mismatch");
  Vec x = input;
  for (int k = 0; k < params.num_layers(); ++k) {
    Vec y = params.weights[k] * x + params.biases[k];
    if (params.activations[k] == Activation::relu) y = y.cwiseMax(0.0);
    x = std::move(y);
  }
  return x;
}

Mat mlp_forward_batch(const MlpParams& params, const Mat& inputs, ForwardTape* tape) {
  if (inputs.rows() != params.input_dim()) throw std::invalid_argument("mlp_forward_batch: input rows mismatch");
  if (tape) {
    tape->input = inputs;
    tape->outputs.clear();
  }
  Mat x = inputs;
  for (int k = 0; k < params.num_layers(); ++k) {
    Mat y = params.weights[k] * x;
    y.colwise() += params.biases[k];
    apply_activation(params.activations[k], y);
    if (tape) tape->outputs.push_back(y);
    x = std::move(y);
  }
  return x;
}

Mat mlp_backward_batch(const MlpParams& params, const ForwardTape& tape, const Mat& upstream,
                       GradBundle& grads) {
  check_shapes(params, grads, "mlp_backward_batch");
  if (tape.outputs.size() != params.weights.size()) throw std::invalid_argument("mlp_backward_batch: stale tape");
  if (upstream.rows() != params.output_dim() || upstream.cols() != tape.input.cols()) {
    throw std::invalid_argument("mlp_backward_batch: upstream shape mismatch");
  }
  Mat delta = upstream;
  for (int k = params.num_layers() - 1; k >= 0; --k) {
    if (params.activations[k] == Activation::relu) {
      delta = delta.cwiseProduct((tape.outputs[k].array() > 0.0).cast<double>().matrix());
    }
    const Mat& layer_input = k == 0 ? tape.input : tape.outputs[k - 1];
    grads.weights[k].noalias() += delta * layer_input.transpose();
    grads.biases[k] += delta.rowwise().sum();
    Mat next = params.weights[k].transpose() * delta;
    delta = std::move(next);
  }
  return delta;
}

GradBundle mlp_backward(const MlpParams& params, const Vec& input, const Vec& upstream_grad) {
  if (input.size() != params.input_dim()) throw std::invalid_argument("mlp_backward: input length mismatch");
  if (upstream_grad.size() != params.output_dim()) {
    throw std::invalid_argument("mlp_backward: upstream gradient length mismatch");
  }
  ForwardTape tape;
  mlp_forward_batch(params, input, &tape);
  GradBundle grads = GradBundle::zeros_like(params);
  mlp_backward_batch(params, tape, upstream_grad, grads);
  return grads;
}

std::pair<double, Vec> mse_and_grad(const Vec& pred, const Vec& target) {
  if (pred.size() != target.size()) throw std::invalid_argument("mse_and_grad: length mismatch");
  if (pred.size() == 0) return {0.0, Vec()};
  const Vec diff = pred - target;
  const double n = static_cast<double>(pred.size());
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

void opt_step(MlpParams& params, const GradBundle& grads, OptState& state) {
  check_shapes(params, grads, "opt_step");
  ++state.step;
  if (state.kind == Optimizer::sgd) {
    for (int k = 0; k < params.num_layers(); ++k) {
      params.weights[k] -= state.lr * grads.weights[k];
      params.biases[k] -= state.lr * grads.biases[k];
    }
    return;
  }
  if (!state.first_moment.matches(params) || !state.second_moment.matches(params)) {
    throw std::invalid_argument("opt_step: optimizer state shape mismatch");
  }
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * grad;
    v = state.beta2 * v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
    param.array() -= state.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + state.eps);
  };
  for (int k = 0; k < params.num_layers(); ++k) {
    update(params.weights[k], grads.weights[k], state.first_moment.weights[k], state.second_moment.weights[k]);
    update(params.biases[k], grads.biases[k], state.first_moment.biases[k], state.second_moment.biases[k]);
  }
}

double clip_grad_norm(std::span<GradBundle* const> grads, double max_norm) {
  double total = 0.0;
  for (const GradBundle* g : grads) total += g->squared_norm();
  const double norm = std::sqrt(total);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (GradBundle* g : grads) *g *= factor;
  }
  return norm;
}

void write_mlp(std::ostream& out, const MlpParams& params) {
  out << "NNET v1\n";
  out << "dims:";
  for (const int d : params.layer_dims) out << ' ' << d;
  out << '\n';
  for (int k = 0; k < params.num_layers(); ++k) {
    const Mat& w = params.weights[k];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) out << (c ? " " : "") << format_double(w(r, c));
      out << '\n';
    }
    const Vec& b = params.biases[k];
    for (Eigen::Index i = 0; i < b.size(); ++i) out << (i ? " " : "") << format_double(b(i));
    out << '\n';
  }
}

MlpParams read_mlp(LineReader& reader) {
  if (trim(reader.expect("NNET header")) != "NNET v1") reader.fail("expected 'NNET v1'");
  const std::string dims_line = reader.expect("dims line");
  const std::string_view dims_view = trim(dims_line);
  if (!dims_view.starts_with("dims:")) reader.fail("expected 'dims:'");
  std::vector<int> dims;
  for (const double d : parse_doubles(dims_view.substr(5), reader.line())) {
    if (d != std::floor(d) || d < 1) reader.fail("dims must be positive integers");
    dims.push_back(static_cast<int>(d));
  }
  if (dims.size() < 2) reader.fail("need at least two dims");
  MlpParams params = mlp_init(dims, 0);
  for (int k = 0; k < params.num_layers(); ++k) {
    Mat& w = params.weights[k];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      const std::string text = reader.expect("weight row");
      const auto row = parse_doubles(text, reader.line());
      if (static_cast<Eigen::Index>(row.size()) != w.cols()) reader.fail("weight row has wrong length");
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = row[c];
    }
    const std::string bias_text = reader.expect("bias row");
    const auto bias = parse_doubles(bias_text, reader.line());
    if (static_cast<Eigen::Index>(bias.size()) != params.biases[k].size()) reader.fail("bias row has wrong length");
    for (std::size_t i = 0; i < bias.size(); ++i) params.biases[k](i) = bias[i];
  }
  return params;
}

MlpParams read_mlp(std::istream& in) {
  LineReader reader(in);
  return read_mlp(reader);
}

}  // namespace traitor
