#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dnnaif/common.hpp"

namespace dnnaif {

enum class Activation { Relu };
enum class GMode { AlphaIdentity, NegAlphaKTranspose };
enum class Head { ScalarLinear, HalfSquaredNorm };

std::string_view to_string(GMode mode);
std::string_view to_string(Head head);
GMode g_mode_from_string(std::string_view name);
Head head_from_string(std::string_view name);

/// Residual network shape.
///
///   y_1     = G_0 relu(K_0 x + b_0)
///   y_{j+1} = y_j + G_j relu(K_j y_j + b_j),   j = 1 .. depth-2
///   y_N     = K_{N-1} y_{N-1} + b_{N-1}
///
/// G_0 is always alpha*I so that y_1 lives in the hidden width. For
/// j >= 1, G_j is alpha*I or -alpha*K_j^T depending on g_mode.
struct Architecture {
  int input_dim = 1;
  int hidden_dim = 16;
  int depth = 2;
  int output_dim = 1;
  Activation activation = Activation::Relu;
  GMode g_mode = GMode::AlphaIdentity;
  double alpha = 1.0;
  Head head = Head::ScalarLinear;

  void validate() const;
  bool operator==(const Architecture&) const = default;
};

/// Trainable arrays plus the affine maps that move inputs and targets into
/// the network's normalized space: x_n = (x - input_shift) ./ input_scale,
/// f = target_shift + target_scale * head(y_N).
struct NetworkParams {
  Architecture arch;
  std::vector<Matrix> K;
  std::vector<Vector> b;
  Vector input_shift;
  Vector input_scale;
  double target_shift = 0.0;
  double target_scale = 1.0;

  bool operator==(const NetworkParams& other) const;
};

/// Same layout as the trainable part of NetworkParams.
struct ParamGradient {
  std::vector<Matrix> K;
  std::vector<Vector> b;

  double squared_norm() const;
};

struct TrainingConfig {
  int iterations = 1000;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool warm_start = true;
  bool normalize_inputs = true;
  bool normalize_targets = true;

  void validate() const;
};

struct TrainResult {
  NetworkParams params;
  double final_loss = 0.0;
  int steps = 0;
  // Set when the loss went non-finite; params are the last finite iterate.
  bool non_finite = false;
};

/// K_j ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), b_j = 0, identity normalization.
NetworkParams init_network(const Architecture& arch, std::uint64_t seed);

/// Network output y_N at x (input normalization applied, head not applied).
Vector forward(const NetworkParams& theta, const Vector& x);

/// Surrogate value in the caller's units (head and target map applied).
double surrogate_value(const NetworkParams& theta, const Vector& x);

/// Surrogate values for every row of X.
Vector surrogate_values(const NetworkParams& theta, const Matrix& X);

/// Exact gradient of surrogate_value with respect to x.
Vector grad_x(const NetworkParams& theta, const Vector& x);

/// Mean squared residual (1/2|X|) sum (t_i - s_i)^2 in normalized target space.
/// X holds one point per row.
double loss(const NetworkParams& theta, const Matrix& X, const Vector& f);

/// Gradient of loss with respect to every K_j and b_j.
ParamGradient grad_theta(const NetworkParams& theta, const Matrix& X, const Vector& f);

/// Plain mini-batch gradient descent. Normalization is refit from (X, f)
/// whenever at least one step runs.
TrainResult train(const NetworkParams& theta, const Matrix& X, const Vector& f,
                  const TrainingConfig& cfg);

/// Refits the input/target affine maps to zero mean and unit variance.
void fit_normalization(NetworkParams& theta, const Matrix& X, const Vector& f,
                       bool inputs, bool targets);

// Checkpoint: one JSON document with the architecture and every array.
void save_checkpoint(const std::string& path, const NetworkParams& theta);
NetworkParams load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const NetworkParams& theta);
NetworkParams checkpoint_from_string(std::string_view text);

}  // namespace dnnaif
