#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "dnnaif/blackbox.hpp"
#include "dnnaif/stencil.hpp"
#include "dnnaif/surrogate.hpp"

namespace dnnaif {

struct IFConfig {
  double h0 = 1.0;
  // Unset means 1e-3 * h0.
  std::optional<double> h_min;
  double tau_tr = 0.9;
  int n_s = 10;
  DirectionKind direction_kind = DirectionKind::SphereUniform;
  int max_iterations = 100;
  std::uint64_t seed = 0;

  double min_step() const { return h_min.value_or(1e-3 * h0); }
  void validate() const;
};

struct ArmijoConfig {
  double mu0 = 1.0;
  double c = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 30;
};

/// Exploration share of the per-iteration point budget, interpolated linearly
/// from initial_fraction at k = 0 to final_fraction at k >= decay_iterations.
struct ExplorationSchedule {
  double initial_fraction = 1.0;
  double final_fraction = 0.2;
  int decay_iterations = 10;
};

struct DNNAIFConfig {
  IFConfig if_cfg;
  int s = 5;
  ExplorationSchedule schedule;
  int n_s_filter = 100;
  Architecture arch;  // input_dim is taken from the objective
  TrainingConfig training;
  int retrain_every = 1;
  ArmijoConfig armijo;
  // Extra points drawn uniformly from the ball of this radius around x0 before
  // the first training.
  int initial_points = 0;
  double initial_radius = 1.0;

  void validate() const;
};

struct OptimizerState {
  Vector x;
  double f = 0.0;
  double h = 0.0;
  std::size_t iteration = 0;
  std::size_t stencil_failures = 0;
  // Set when the evaluation budget ran out before a stopping rule fired.
  bool truncated = false;
};

/// One row per iteration; row 0 is the state after the initial evaluation(s).
struct IterationTrace {
  std::size_t iteration = 0;
  double h = 0.0;  // radius after this iteration's update
  double best_f = 0.0;
  double best_f_true = 0.0;  // NaN when the objective has no noiseless truth
  std::size_t evals_cumulative = 0;
  // nullopt marks a stencil failure.
  std::optional<Origin> accepted_origin;
  bool try_point_accepted = false;
  Vector x;  // incumbent after this iteration
};

/// Surrogate value at an exploitation candidate, logged when the point passed
/// the filter and was sent to the true objective.
struct FilterRecord {
  std::size_t iteration = 0;
  std::size_t eval_index = 0;
  Vector x;
  double surrogate = 0.0;
  double f_incumbent = 0.0;
};

struct TryPointRecord {
  std::size_t iteration = 0;
  Vector x_incumbent;
  Vector x_try;
  double h = 0.0;
};

struct IFResult {
  OptimizerState state;
  std::vector<IterationTrace> traces;
};

struct DNNAIFResult {
  OptimizerState state;
  std::vector<IterationTrace> traces;
  NetworkParams theta;
  std::vector<FilterRecord> filter_log;
  std::vector<TryPointRecord> try_log;
  int training_failures = 0;
};

/// Plain implicit filtering: sample n_s stencil points, move to the best one
/// if it strictly improves, otherwise shrink h by tau_tr.
IFResult implicit_filtering(const Objective& obj, const Vector& x0, const IFConfig& cfg,
                            Ledger& ledger);

struct ArmijoResult {
  double mu = 0.0;
  bool accepted = false;
};

/// Largest mu in {mu0 * backtrack^i} with sufficient decrease along -g.
ArmijoResult armijo_search(const std::function<double(const Vector&)>& value_fn, const Vector& x,
                           const Vector& g, const ArmijoConfig& cfg);

/// Value and gradient of a differentiable model of the objective.
struct SurrogateModel {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

SurrogateModel network_model(const NetworkParams& theta);

/// Up to s Armijo gradient steps on the model starting from x_k. A step that
/// would leave the ball ||x - x_k|| <= h is rejected and the previous iterate
/// returned. The first Armijo trial of each step is capped at length h.
Vector surrogate_descent(const Vector& x_k, const SurrogateModel& model, int s, double h,
                         const ArmijoConfig& armijo = {});
Vector surrogate_descent(const Vector& x_k, const NetworkParams& theta, int s, double h,
                         const ArmijoConfig& armijo = {});

struct FilteredSample {
  std::vector<Vector> points;
  std::vector<double> surrogate_values;  // aligned with points
  int draws = 0;
};

/// Draws up to n_s directions and keeps x_k + h w whenever the model predicts
/// a value <= f_k, stopping after n_f acceptances.
FilteredSample filtered_sampling(const Vector& x_k, double f_k, double h,
                                 const std::function<double(const Vector&)>& model_value,
                                 int n_f, int n_s, DirectionKind kind, Rng& rng);

/// (n_e, n_f) with n_e + n_f = n_total.
std::pair<int, int> exploration_schedule(std::size_t k, int n_total,
                                         const ExplorationSchedule& schedule);

/// Implicit filtering accelerated by a residual-network surrogate.
DNNAIFResult dnnaif(const Objective& obj, const Vector& x0, const DNNAIFConfig& cfg,
                    Ledger& ledger);

/// Surrogate-only baseline: fit the network to everything seen so far and
/// evaluate the end points of untrusted surrogate descents, n_s + 1 per
/// iteration.
DNNAIFResult dnn_only(const Objective& obj, const Vector& x0, const DNNAIFConfig& cfg,
                      Ledger& ledger);

}  // namespace dnnaif
