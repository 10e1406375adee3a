#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace traitor {

class LineReader;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Activation { relu, identity };

/// Fully connected network. Layer k maps layer_dims[k] -> layer_dims[k+1];
/// hidden layers use relu, the final layer is linear.
struct MlpParams {
  std::vector<int> layer_dims;
  std::vector<Mat> weights;  // (layer_dims[k+1] x layer_dims[k])
  std::vector<Vec> biases;   // layer_dims[k+1]
  std::vector<Activation> activations;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  std::size_t num_parameters() const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Gradients (or any per-parameter quantity) shape-matched to an MlpParams.
struct GradBundle {
  std::vector<Mat> weights;
  std::vector<Vec> biases;

  static GradBundle zeros_like(const MlpParams& params);
  GradBundle& operator+=(const GradBundle& other);
  GradBundle& operator*=(double factor);
  double squared_norm() const;
  bool matches(const MlpParams& params) const;
};

enum class Optimizer { sgd, adam };

struct OptState {
  Optimizer kind = Optimizer::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  GradBundle first_moment;
  GradBundle second_moment;
};

OptState make_opt_state(const MlpParams& params, Optimizer kind, double lr);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
MlpParams mlp_init(std::span<const int> layer_dims, std::uint64_t seed);
inline MlpParams mlp_init(std::initializer_list<int> layer_dims, std::uint64_t seed) {
  return mlp_init(std::span<const int>(layer_dims.begin(), layer_dims.size()), seed);
}

Vec mlp_forward(const MlpParams& params, const Vec& input);

/// Gradient of dot(upstream_grad, mlp_forward(params, input)) w.r.t. the parameters.
GradBundle mlp_backward(const MlpParams& params, const Vec& input, const Vec& upstream_grad);

/// Mean squared error over components and its gradient w.r.t. pred.
std::pair<double, Vec> mse_and_grad(const Vec& pred, const Vec& target);

void opt_step(MlpParams& params, const GradBundle& grads, OptState& state);

/// Activations retained by a batched forward pass for the backward pass.
struct ForwardTape {
  Mat input;
  std::vector<Mat> outputs;  // post-activation output of each layer
};

/// Columns of `inputs` are samples.
Mat mlp_forward_batch(const MlpParams& params, const Mat& inputs, ForwardTape* tape = nullptr);

/// Accumulates parameter gradients of sum_b dot(upstream.col(b), out.col(b))
/// into `grads` and returns the gradient w.r.t. the inputs.
Mat mlp_backward_batch(const MlpParams& params, const ForwardTape& tape, const Mat& upstream,
                       GradBundle& grads);

/// Rescales `grads` so its global L2 norm is at most max_norm. Returns the pre-clip norm.
double clip_grad_norm(std::span<GradBundle* const> grads, double max_norm);

// Checkpoint text format:
//   NNET v1
//   dims: d0 d1 ... dL
//   then for each layer: one line per weight row, one line of biases,
//   values printed with 17 significant digits.
void write_mlp(std::ostream& out, const MlpParams& params);
MlpParams read_mlp(std::istream& in);
MlpParams read_mlp(LineReader& reader);

}  // namespace traitor
