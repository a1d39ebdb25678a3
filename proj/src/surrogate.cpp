#include "dnnaif/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dnnaif {

std::string_view to_string(GMode mode) {
  return mode == GMode::AlphaIdentity ? "alpha-identity" : "neg-alpha-k-transpose";
}

std::string_view to_string(Head head) {
  return head == Head::ScalarLinear ? "scalar-linear" : "half-squared-norm";
}

GMode g_mode_from_string(std::string_view name) {
  if (name == "alpha-identity") return GMode::AlphaIdentity;
  if (name == "neg-alpha-k-transpose") return GMode::NegAlphaKTranspose;
  throw Error(ErrorKind::ValidationError, "unknown g_mode '" + std::string(name) + "'");
}

Head head_from_string(std::string_view name) {
  if (name == "scalar-linear") return Head::ScalarLinear;
  if (name == "half-squared-norm") return Head::HalfSquaredNorm;
  throw Error(ErrorKind::ValidationError, "unknown head '" + std::string(name) + "'");
}

void Architecture::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || output_dim < 1) {
    throw Error(ErrorKind::ValidationError, "network dimensions must be positive");
  }
  if (depth < 2) throw Error(ErrorKind::ValidationError, "depth must be at least 2");
  if (!(alpha > 0.0)) throw Error(ErrorKind::ValidationError, "alpha must be positive");
  if (head == Head::ScalarLinear && output_dim != 1) {
    throw Error(ErrorKind::HeadMismatch, "scalar-linear head needs output_dim = 1");
  }
}

void TrainingConfig::validate() const {
  if (iterations < 0) throw Error(ErrorKind::ValidationError, "iterations must be >= 0");
  if (batch_size < 1) throw Error(ErrorKind::ValidationError, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) {
    throw Error(ErrorKind::ValidationError, "learning_rate must be positive");
  }
}

bool NetworkParams::operator==(const NetworkParams& other) const {
  if (!(arch == other.arch) || K.size() != other.K.size() || b.size() != other.b.size()) {
    return false;
  }
  for (std::size_t j = 0; j < K.size(); ++j) {
    if (K[j].rows() != other.K[j].rows() || K[j].cols() != other.K[j].cols() ||
        K[j] != other.K[j] || b[j].size() != other.b[j].size() || b[j] != other.b[j]) {
      return false;
    }
  }
  return input_shift.size() == other.input_shift.size() && input_shift == other.input_shift &&
         input_scale.size() == other.input_scale.size() && input_scale == other.input_scale &&
         target_shift == other.target_shift && target_scale == other.target_scale;
}

double ParamGradient::squared_norm() const {
  double total = 0.0;
  for (const auto& k : K) total += k.squaredNorm();
  for (const auto& v : b) total += v.squaredNorm();
  return total;
}

NetworkParams init_network(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  NetworkParams theta;
  theta.arch = arch;
  Rng rng = make_rng(seed, streams::kInit);
  const int N = arch.depth;
  for (int j = 0; j < N; ++j) {
    const int fan_in = j == 0 ? arch.input_dim : arch.hidden_dim;
    const int fan_out = j == N - 1 ? arch.output_dim : arch.hidden_dim;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix k(fan_out, fan_in);
    for (Eigen::Index c = 0; c < k.cols(); ++c) {
      for (Eigen::Index r = 0; r < k.rows(); ++r) k(r, c) = dist(rng);
    }
    theta.K.push_back(std::move(k));
    theta.b.push_back(Vector::Zero(fan_out));
  }
  theta.input_shift = Vector::Zero(arch.input_dim);
  theta.input_scale = Vector::Ones(arch.input_dim);
  return theta;
}

namespace {

void check_params(const NetworkParams& theta) {
  const Architecture& a = theta.arch;
  const auto N = static_cast<std::size_t>(a.depth);
  if (theta.K.size() != N || theta.b.size() != N) {
    throw Error(ErrorKind::DimensionMismatch, "parameter count does not match depth");
  }
  for (std::size_t j = 0; j < N; ++j) {
    const int rows = j + 1 == N ? a.output_dim : a.hidden_dim;
    const int cols = j == 0 ? a.input_dim : a.hidden_dim;
    if (theta.K[j].rows() != rows || theta.K[j].cols() != cols || theta.b[j].size() != rows) {
      throw Error(ErrorKind::DimensionMismatch, "layer " + std::to_string(j) + " has wrong shape");
    }
  }
  if (theta.input_shift.size() != a.input_dim || theta.input_scale.size() != a.input_dim) {
    throw Error(ErrorKind::DimensionMismatch, "input normalization has wrong size");
  }
}

// Activations of a batch stored column-wise (one column per point).
struct Cache {
  std::vector<Matrix> y;  // y[0] = normalized input, y[N] = output
  std::vector<Matrix> z;  // pre-activations, z[j] for j = 0 .. N-2
};

Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& z) {
  return (z.array() > 0.0).cast<double>().matrix();
}

Matrix normalize_inputs(const NetworkParams& theta, const Matrix& points_by_column) {
  return (points_by_column.colwise() - theta.input_shift).array().colwise() /
         theta.input_scale.array();
}

Cache run_forward(const NetworkParams& theta, const Matrix& y0) {
  const Architecture& a = theta.arch;
  const int N = a.depth;
  Cache cache;
  cache.y.reserve(static_cast<std::size_t>(N) + 1);
  cache.z.reserve(static_cast<std::size_t>(N) - 1);
  cache.y.push_back(y0);
  for (int j = 0; j + 1 < N; ++j) {
    const auto u = static_cast<std::size_t>(j);
    Matrix z = (theta.K[u] * cache.y[u]).colwise() + theta.b[u];
    Matrix act = relu(z);
    Matrix next;
    if (j == 0) {
      next = a.alpha * act;
    } else if (a.g_mode == GMode::AlphaIdentity) {
      next = cache.y[u] + a.alpha * act;
    } else {
      next = cache.y[u] - a.alpha * (theta.K[u].transpose() * act);
    }
    cache.z.push_back(std::move(z));
    cache.y.push_back(std::move(next));
  }
  const auto last = static_cast<std::size_t>(N - 1);
  cache.y.push_back((theta.K[last] * cache.y[last]).colwise() + theta.b[last]);
  return cache;
}

// Head values (normalized space) for each column of the network output.
Vector head_values(const Architecture& a, const Matrix& out) {
  if (a.head == Head::ScalarLinear) {
    if (out.rows() != 1) throw Error(ErrorKind::HeadMismatch, "scalar head needs m = 1");
    return out.row(0).transpose();
  }
  return 0.5 * out.colwise().squaredNorm().transpose();
}

// d head / d y_N scaled column-wise by ds.
Matrix head_backward(const Architecture& a, const Matrix& out, const Vector& ds) {
  if (a.head == Head::ScalarLinear) return ds.transpose();
  return out.array().rowwise() * ds.transpose().array();
}

struct Backward {
  ParamGradient params;
  Matrix d_input;  // gradient with respect to the normalized input
};

Backward run_backward(const NetworkParams& theta, const Cache& cache, Matrix d_out,
                      bool want_params) {
  const Architecture& a = theta.arch;
  const int N = a.depth;
  Backward result;
  if (want_params) {
    result.params.K.resize(static_cast<std::size_t>(N));
    result.params.b.resize(static_cast<std::size_t>(N));
  }
  const auto last = static_cast<std::size_t>(N - 1);
  if (want_params) {
    result.params.K[last] = d_out * cache.y[last].transpose();
    result.params.b[last] = d_out.rowwise().sum();
  }
  Matrix dy = theta.K[last].transpose() * d_out;

  for (int j = N - 2; j >= 0; --j) {
    const auto u = static_cast<std::size_t>(j);
    const Matrix& z = cache.z[u];
    Matrix d_act;
    if (j == 0 || a.g_mode == GMode::AlphaIdentity) {
      d_act = a.alpha * dy;
    } else {
      d_act = -a.alpha * (theta.K[u] * dy);
    }
    const Matrix dz = d_act.cwiseProduct(relu_mask(z));
    if (want_params) {
      Matrix gk = dz * cache.y[u].transpose();
      if (j > 0 && a.g_mode == GMode::NegAlphaKTranspose) {
        // y_{j+1} depends on K_j a second time through G_j = -alpha K_j^T.
        gk -= a.alpha * (relu(z) * dy.transpose());
      }
      result.params.K[u] = std::move(gk);
      result.params.b[u] = dz.rowwise().sum();
    }
    Matrix back = theta.K[u].transpose() * dz;
    if (j > 0) back += dy;  // identity skip connection
    dy = std::move(back);
  }
  result.d_input = std::move(dy);
  return result;
}

Vector normalized_targets(const NetworkParams& theta, const Vector& f) {
  return (f.array() - theta.target_shift) / theta.target_scale;
}

void check_dataset(const NetworkParams& theta, const Matrix& X, const Vector& f) {
  if (X.rows() == 0) throw Error(ErrorKind::EmptyDataset, "no training points");
  if (X.rows() != f.size()) {
    throw Error(ErrorKind::DimensionMismatch, "X rows and f length differ");
  }
  if (X.cols() != theta.arch.input_dim) {
    throw Error(ErrorKind::DimensionMismatch, "X columns do not match input_dim");
  }
}

void check_input(const NetworkParams& theta, const Vector& x) {
  if (x.size() != theta.arch.input_dim) {
    throw Error(ErrorKind::DimensionMismatch,
                "expected input of dimension " + std::to_string(theta.arch.input_dim));
  }
}

}  // namespace

Vector forward(const NetworkParams& theta, const Vector& x) {
  check_params(theta);
  check_input(theta, x);
  const Cache cache = run_forward(theta, normalize_inputs(theta, x));
  return cache.y.back().col(0);
}

double surrogate_value(const NetworkParams& theta, const Vector& x) {
  const Vector out = forward(theta, x);
  const Vector s = head_values(theta.arch, out);
  return theta.target_shift + theta.target_scale * s[0];
}

Vector surrogate_values(const NetworkParams& theta, const Matrix& X) {
  check_params(theta);
  if (X.cols() != theta.arch.input_dim) {
    throw Error(ErrorKind::DimensionMismatch, "X columns do not match input_dim");
  }
  const Cache cache = run_forward(theta, normalize_inputs(theta, X.transpose()));
  const Vector s = head_values(theta.arch, cache.y.back());
  return (theta.target_shift + theta.target_scale * s.array()).matrix();
}

Vector grad_x(const NetworkParams& theta, const Vector& x) {
  check_params(theta);
  check_input(theta, x);
  const Cache cache = run_forward(theta, normalize_inputs(theta, x));
  head_values(theta.arch, cache.y.back());  // validates the head
  Vector ds(1);
  ds[0] = theta.target_scale;
  const Backward back =
      run_backward(theta, cache, head_backward(theta.arch, cache.y.back(), ds), false);
  return back.d_input.col(0).cwiseQuotient(theta.input_scale);
}

double loss(const NetworkParams& theta, const Matrix& X, const Vector& f) {
  check_params(theta);
  check_dataset(theta, X, f);
  const Cache cache = run_forward(theta, normalize_inputs(theta, X.transpose()));
  const Vector r = normalized_targets(theta, f) - head_values(theta.arch, cache.y.back());
  return 0.5 * r.squaredNorm() / static_cast<double>(X.rows());
}

namespace {

// Loss and parameter gradient for a batch given in column layout.
double loss_and_gradient(const NetworkParams& theta, const Matrix& inputs_by_column,
                         const Vector& targets, ParamGradient* grad) {
  const Cache cache = run_forward(theta, normalize_inputs(theta, inputs_by_column));
  const Vector s = head_values(theta.arch, cache.y.back());
  const Vector r = targets - s;
  const double count = static_cast<double>(targets.size());
  if (grad != nullptr) {
    const Vector ds = -r / count;
    *grad = run_backward(theta, cache, head_backward(theta.arch, cache.y.back(), ds), true)
                .params;
  }
  return 0.5 * r.squaredNorm() / count;
}

}  // namespace

ParamGradient grad_theta(const NetworkParams& theta, const Matrix& X, const Vector& f) {
  check_params(theta);
  check_dataset(theta, X, f);
  ParamGradient grad;
  loss_and_gradient(theta, X.transpose(), normalized_targets(theta, f), &grad);
  return grad;
}

void fit_normalization(NetworkParams& theta, const Matrix& X, const Vector& f, bool inputs,
                       bool targets) {
  constexpr double kMinScale = 1e-12;
  const double count = static_cast<double>(X.rows());
  if (inputs) {
    theta.input_shift = X.colwise().mean().transpose();
    const Matrix centered = X.rowwise() - theta.input_shift.transpose();
    theta.input_scale = (centered.colwise().squaredNorm().transpose() / count).cwiseSqrt();
    for (Eigen::Index i = 0; i < theta.input_scale.size(); ++i) {
      if (!(theta.input_scale[i] > kMinScale)) theta.input_scale[i] = 1.0;
    }
  } else {
    theta.input_shift = Vector::Zero(theta.arch.input_dim);
    theta.input_scale = Vector::Ones(theta.arch.input_dim);
  }
  if (targets) {
    theta.target_shift = f.mean();
    const double var = (f.array() - theta.target_shift).square().sum() / count;
    const double scale = std::sqrt(var);
    theta.target_scale = scale > kMinScale ? scale : 1.0;
  } else {
    theta.target_shift = 0.0;
    theta.target_scale = 1.0;
  }
}

namespace {

bool all_finite(const NetworkParams& theta) {
  for (const auto& k : theta.K) {
    if (!k.allFinite()) return false;
  }
  for (const auto& v : theta.b) {
    if (!v.allFinite()) return false;
  }
  return true;
}

}  // namespace

TrainResult train(const NetworkParams& theta, const Matrix& X, const Vector& f,
                  const TrainingConfig& cfg) {
  cfg.validate();
  check_dataset(theta, X, f);
  TrainResult result;
  result.params = cfg.warm_start ? theta : init_network(theta.arch, cfg.seed);
  NetworkParams& params = result.params;
  check_params(params);
  if (cfg.iterations == 0) {
    result.final_loss = loss(params, X, f);
    return result;
  }
  fit_normalization(params, X, f, cfg.normalize_inputs, cfg.normalize_targets);

  const Matrix inputs = X.transpose();
  const Vector targets = normalized_targets(params, f);
  const auto count = static_cast<std::size_t>(X.rows());
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), count);

  Rng rng = make_rng(cfg.seed, streams::kTraining);
  std::vector<Eigen::Index> order(count);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::size_t cursor = count;  // forces a shuffle on the first step

  Matrix batch_inputs(inputs.rows(), static_cast<Eigen::Index>(batch));
  Vector batch_targets(static_cast<Eigen::Index>(batch));
  NetworkParams last_finite = params;
  ParamGradient grad;
  for (int step = 0; step < cfg.iterations; ++step) {
    if (cursor >= count) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::size_t take = std::min(batch, count - cursor);
    batch_inputs.resize(inputs.rows(), static_cast<Eigen::Index>(take));
    batch_targets.resize(static_cast<Eigen::Index>(take));
    for (std::size_t i = 0; i < take; ++i) {
      const Eigen::Index src = order[cursor + i];
      batch_inputs.col(static_cast<Eigen::Index>(i)) = inputs.col(src);
      batch_targets[static_cast<Eigen::Index>(i)] = targets[src];
    }
    cursor += take;

    const double batch_loss = loss_and_gradient(params, batch_inputs, batch_targets, &grad);
    if (!std::isfinite(batch_loss) || !std::isfinite(grad.squared_norm())) {
      params = last_finite;
      result.non_finite = true;
      break;
    }
    last_finite = params;
    for (std::size_t j = 0; j < params.K.size(); ++j) {
      params.K[j] -= cfg.learning_rate * grad.K[j];
      params.b[j] -= cfg.learning_rate * grad.b[j];
    }
    ++result.steps;
    if (!all_finite(params)) {
      params = last_finite;
      result.non_finite = true;
      break;
    }
  }
  result.final_loss = loss_and_gradient(params, inputs, targets, nullptr);
  if (!std::isfinite(result.final_loss)) result.non_finite = true;
  return result;
}

}  // namespace dnnaif
