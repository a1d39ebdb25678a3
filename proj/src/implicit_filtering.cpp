#include <string>

#include "optimize_internal.hpp"

namespace dnnaif {

void IFConfig::validate() const {
  if (!(tau_tr > 0.0 && tau_tr < 1.0)) {
    throw Error(ErrorKind::ValidationError, "tau_tr must lie in (0, 1)");
  }
  if (!(h0 > 0.0)) throw Error(ErrorKind::ValidationError, "h0 must be positive");
  const double h_floor = min_step();
  if (!(h_floor >= 0.0 && h0 > h_floor)) {
    throw Error(ErrorKind::ValidationError, "need h0 > h_min >= 0");
  }
  if (n_s < 1) throw Error(ErrorKind::ValidationError, "n_s must be positive");
  if (max_iterations < 0) throw Error(ErrorKind::ValidationError, "max_iterations must be >= 0");
}

IFResult implicit_filtering(const Objective& obj, const Vector& x0, const IFConfig& cfg,
                            Ledger& ledger) {
  cfg.validate();
  IFResult result;
  OptimizerState& state = result.state;
  state.x = x0;
  state.h = cfg.h0;
  state.f = evaluate(obj, x0, ledger, 0, Origin::Initial);
  result.traces.push_back(detail::make_trace(obj, state, ledger, Origin::Initial, false));

  Rng dir_rng = make_rng(cfg.seed, streams::kDirections);
  const int n = obj.dimension;
  const double h_floor = cfg.min_step();
  while (state.h > h_floor && state.iteration < static_cast<std::size_t>(cfg.max_iterations)) {
    if (ledger.exhausted()) {
      state.truncated = true;
      break;
    }
    ++state.iteration;
    const DirectionSet dirs = draw_directions(cfg.direction_kind, n, cfg.n_s, dir_rng);
    std::vector<Vector> points = stencil_points(state.x, state.h, dirs);
    if (points.size() > ledger.remaining()) {
      points.resize(ledger.remaining());
      state.truncated = true;
    }
    const std::vector<double> values =
        evaluate_batch(obj, points, ledger, state.iteration, Origin::Exploration);
    const std::size_t best = detail::argmin_first(values);
    std::optional<Origin> accepted;
    if (values[best] < state.f) {
      state.x = points[best];
      state.f = values[best];
      accepted = Origin::Exploration;
    } else if (!state.truncated) {
      state.h *= cfg.tau_tr;
      ++state.stencil_failures;
    }
    result.traces.push_back(detail::make_trace(obj, state, ledger, accepted, false));
    if (state.truncated) break;
  }
  return result;
}

}  // namespace dnnaif
