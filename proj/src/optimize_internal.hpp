#pragma once

#include <cmath>
#include <limits>

#include "dnnaif/optimize.hpp"

namespace dnnaif::detail {

inline double true_value(const Objective& obj, const Vector& x) {
  return obj.truth ? obj.truth(x) : std::numeric_limits<double>::quiet_NaN();
}

inline IterationTrace make_trace(const Objective& obj, const OptimizerState& state,
                                 const Ledger& ledger, std::optional<Origin> accepted,
                                 bool try_accepted) {
  IterationTrace trace;
  trace.iteration = state.iteration;
  trace.h = state.h;
  trace.best_f = state.f;
  trace.best_f_true = true_value(obj, state.x);
  trace.evals_cumulative = ledger.count();
  trace.accepted_origin = accepted;
  trace.try_point_accepted = try_accepted;
  trace.x = state.x;
  return trace;
}

// Index of the first minimum.
inline std::size_t argmin_first(const std::vector<double>& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

std::vector<Vector> ball_design(const Vector& center, double radius, int count, Rng& rng);

OptimizerState initialize(const Objective& obj, const Vector& x0, const DNNAIFConfig& cfg,
                          Ledger& ledger);

bool retrain(NetworkParams& theta, const Ledger& ledger, const TrainingConfig& base,
             std::size_t iteration, bool first);

}  // namespace dnnaif::detail
