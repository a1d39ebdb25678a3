#include <algorithm>
#include <numeric>

#include "optimize_internal.hpp"

namespace dnnaif {

namespace {

// Armijo descent on the surrogate with no trust region; only the first trial
// step of each iteration is capped at max_step.
Vector untrusted_descent(const Vector& start, const NetworkParams& theta, int s, double max_step,
                         const ArmijoConfig& armijo) {
  const SurrogateModel model = network_model(theta);
  Vector x = start;
  for (int step = 0; step < s; ++step) {
    const Vector g = model.gradient(x);
    const double g_norm = g.norm();
    if (!(g_norm > 0.0) || !std::isfinite(g_norm)) break;
    ArmijoConfig trial = armijo;
    trial.mu0 = std::min(armijo.mu0, max_step / g_norm);
    const ArmijoResult ls = armijo_search(model.value, x, g, trial);
    if (!ls.accepted) break;
    x -= ls.mu * g;
  }
  return x;
}

}  // namespace

DNNAIFResult dnn_only(const Objective& obj, const Vector& x0, const DNNAIFConfig& cfg,
                      Ledger& ledger) {
  cfg.validate();
  const IFConfig& icfg = cfg.if_cfg;
  Architecture arch = cfg.arch;
  arch.input_dim = obj.dimension;

  DNNAIFResult result;
  OptimizerState& state = result.state;
  state = detail::initialize(obj, x0, cfg, ledger);
  result.traces.push_back(detail::make_trace(obj, state, ledger, Origin::Initial, false));
  result.theta = init_network(arch, cfg.training.seed);
  bool usable = detail::retrain(result.theta, ledger, cfg.training, 0, true);
  if (!usable) ++result.training_failures;

  const auto per_iteration = static_cast<std::size_t>(icfg.n_s + 1);
  Rng rng = make_rng(icfg.seed, streams::kDirections);
  while (state.iteration < static_cast<std::size_t>(icfg.max_iterations)) {
    if (ledger.exhausted()) {
      state.truncated = true;
      break;
    }
    const std::size_t k = ++state.iteration;

    // Descend from the best points seen so far.
    const auto& records = ledger.records();
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return records[a].f < records[b].f; });
    std::vector<Vector> points;
    for (std::size_t i = 0; i < per_iteration; ++i) {
      const Vector& start = records[order[i % order.size()]].x;
      if (usable) {
        points.push_back(untrusted_descent(start, result.theta, cfg.s, icfg.h0, cfg.armijo));
      } else {
        points.push_back(start + icfg.h0 * sphere_directions(obj.dimension, 1, rng).directions[0]);
      }
    }
    if (points.size() > ledger.remaining()) {
      points.resize(ledger.remaining());
      state.truncated = true;
    }
    const std::vector<double> values =
        evaluate_batch(obj, points, ledger, k, Origin::Exploitation);
    std::optional<Origin> accepted;
    if (!values.empty()) {
      const std::size_t best = detail::argmin_first(values);
      if (values[best] < state.f) {
        state.x = points[best];
        state.f = values[best];
        accepted = Origin::Exploitation;
      }
    }
    result.traces.push_back(detail::make_trace(obj, state, ledger, accepted, false));
    if (state.truncated) break;
    usable = detail::retrain(result.theta, ledger, cfg.training, k, false);
    if (!usable) ++result.training_failures;
  }
  return result;
}

}  // namespace dnnaif
