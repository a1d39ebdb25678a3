#include <string>

#include "optimize_internal.hpp"

namespace dnnaif {

void DNNAIFConfig::validate() const {
  if_cfg.validate();
  if (s < 1) throw Error(ErrorKind::ValidationError, "s must be at least 1");
  if (!(schedule.final_fraction > 0.0 && schedule.final_fraction <= 1.0)) {
    throw Error(ErrorKind::ValidationError, "final exploration fraction must lie in (0, 1]");
  }
  if (!(schedule.initial_fraction >= 0.0 && schedule.initial_fraction <= 1.0)) {
    throw Error(ErrorKind::ValidationError, "initial exploration fraction must lie in [0, 1]");
  }
  if (schedule.decay_iterations < 0) {
    throw Error(ErrorKind::ValidationError, "decay_iterations must be >= 0");
  }
  if (n_s_filter < 1) throw Error(ErrorKind::ValidationError, "n_s_filter must be positive");
  if (retrain_every < 1) throw Error(ErrorKind::ValidationError, "retrain_every must be positive");
  if (initial_points < 0) throw Error(ErrorKind::ValidationError, "initial_points must be >= 0");
  if (!(initial_radius > 0.0)) {
    throw Error(ErrorKind::ValidationError, "initial_radius must be positive");
  }
  if (!(armijo.c > 0.0 && armijo.c < 1.0) || !(armijo.backtrack > 0.0 && armijo.backtrack < 1.0) ||
      !(armijo.mu0 > 0.0) || armijo.max_backtracks < 0) {
    throw Error(ErrorKind::ValidationError, "invalid Armijo parameters");
  }
  training.validate();
  Architecture probe = arch;
  probe.input_dim = 1;
  probe.validate();
}

namespace detail {

// Uniform draws from the ball of the given radius around center.
std::vector<Vector> ball_design(const Vector& center, double radius, int count, Rng& rng) {
  const auto n = static_cast<int>(center.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> points;
  const DirectionSet dirs = sphere_directions(n, count, rng);
  for (const Vector& w : dirs.directions) {
    const double r = radius * std::pow(unit(rng), 1.0 / n);
    points.push_back(center + r * w);
  }
  return points;
}

// Evaluates the initial point plus the optional ball design, leaving the best
// observed point as the incumbent.
OptimizerState initialize(const Objective& obj, const Vector& x0, const DNNAIFConfig& cfg,
                          Ledger& ledger) {
  OptimizerState state;
  state.x = x0;
  state.h = cfg.if_cfg.h0;
  state.f = evaluate(obj, x0, ledger, 0, Origin::Initial);
  if (cfg.initial_points > 0) {
    Rng rng = make_rng(cfg.if_cfg.seed, streams::kDesign);
    std::vector<Vector> design = ball_design(x0, cfg.initial_radius, cfg.initial_points, rng);
    if (design.size() > ledger.remaining()) design.resize(ledger.remaining());
    const std::vector<double> values = evaluate_batch(obj, design, ledger, 0, Origin::Initial);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] < state.f) {
        state.f = values[i];
        state.x = design[i];
      }
    }
  }
  return state;
}

// Retrains on the full history. Returns false when training diverged.
bool retrain(NetworkParams& theta, const Ledger& ledger, const TrainingConfig& base,
             std::size_t iteration, bool first) {
  const History history = history_snapshot(ledger);
  TrainingConfig cfg = base;
  cfg.seed = derive_seed(base.seed, streams::kTraining, iteration);
  if (first) {
    cfg.warm_start = false;
    cfg.seed = base.seed;
  }
  TrainResult result = train(theta, history.X, history.f, cfg);
  // Keep the last finite parameters so a later warm start does not inherit NaNs.
  if (result.non_finite) return false;
  theta = std::move(result.params);
  return true;
}

}  // namespace detail

DNNAIFResult dnnaif(const Objective& obj, const Vector& x0, const DNNAIFConfig& cfg,
                    Ledger& ledger) {
  cfg.validate();
  const IFConfig& icfg = cfg.if_cfg;
  const int n = obj.dimension;
  Architecture arch = cfg.arch;
  arch.input_dim = n;

  DNNAIFResult result;
  OptimizerState& state = result.state;
  state = detail::initialize(obj, x0, cfg, ledger);
  result.traces.push_back(detail::make_trace(obj, state, ledger, Origin::Initial, false));

  result.theta = init_network(arch, cfg.training.seed);
  bool usable = detail::retrain(result.theta, ledger, cfg.training, 0, true);
  if (!usable) ++result.training_failures;

  Rng dir_rng = make_rng(icfg.seed, streams::kDirections);
  Rng filter_rng = make_rng(icfg.seed, streams::kFilter);
  const double h_floor = icfg.min_step();

  while (state.h > h_floor && state.iteration < static_cast<std::size_t>(icfg.max_iterations)) {
    if (ledger.exhausted()) {
      state.truncated = true;
      break;
    }
    const std::size_t k = ++state.iteration;
    std::optional<Origin> accepted;
    bool try_accepted = false;

    // Candidate values in order [try point, exploration, exploitation].
    std::vector<Vector> candidates;
    std::vector<double> values;
    std::vector<Origin> origins;

    if (usable) {
      Vector x_try = surrogate_descent(state.x, result.theta, cfg.s, state.h, cfg.armijo);
      result.try_log.push_back({k, state.x, x_try, state.h});
      const double f_try = evaluate(obj, x_try, ledger, k, Origin::TryPoint);
      if (f_try < state.f) {
        state.x = std::move(x_try);
        state.f = f_try;
        accepted = Origin::TryPoint;
        try_accepted = true;
      } else {
        candidates.push_back(std::move(x_try));
        values.push_back(f_try);
        origins.push_back(Origin::TryPoint);
      }
    }

    if (!try_accepted) {
      const auto [n_e, n_f] = usable ? exploration_schedule(k - 1, icfg.n_s, cfg.schedule)
                                     : std::pair<int, int>{icfg.n_s, 0};
      const DirectionSet dirs = draw_directions(icfg.direction_kind, n, n_e, dir_rng);
      std::vector<Vector> explore = stencil_points(state.x, state.h, dirs);
      FilteredSample filtered;
      if (n_f > 0) {
        filtered = filtered_sampling(
            state.x, state.f, state.h,
            [&](const Vector& x) { return surrogate_value(result.theta, x); }, n_f,
            cfg.n_s_filter, icfg.direction_kind, filter_rng);
      }

      if (explore.size() > ledger.remaining()) {
        explore.resize(ledger.remaining());
        state.truncated = true;
      }
      const std::vector<double> f_explore =
          evaluate_batch(obj, explore, ledger, k, Origin::Exploration);
      if (filtered.points.size() > ledger.remaining()) {
        filtered.points.resize(ledger.remaining());
        state.truncated = true;
      }
      const std::size_t first_exploit = ledger.count();
      const std::vector<double> f_exploit =
          evaluate_batch(obj, filtered.points, ledger, k, Origin::Exploitation);
      for (std::size_t i = 0; i < filtered.points.size(); ++i) {
        result.filter_log.push_back(
            {k, first_exploit + i, filtered.points[i], filtered.surrogate_values[i], state.f});
      }

      for (std::size_t i = 0; i < explore.size(); ++i) {
        candidates.push_back(std::move(explore[i]));
        values.push_back(f_explore[i]);
        origins.push_back(Origin::Exploration);
      }
      for (std::size_t i = 0; i < filtered.points.size(); ++i) {
        candidates.push_back(std::move(filtered.points[i]));
        values.push_back(f_exploit[i]);
        origins.push_back(Origin::Exploitation);
      }

      if (!values.empty()) {
        const std::size_t best = detail::argmin_first(values);
        if (values[best] < state.f) {
          state.x = candidates[best];
          state.f = values[best];
          accepted = origins[best];
        }
      }
      if (!accepted && !state.truncated) {
        state.h *= icfg.tau_tr;
        ++state.stencil_failures;
      }
    }

    result.traces.push_back(detail::make_trace(obj, state, ledger, accepted, try_accepted));
    if (state.truncated) break;
    if (k % static_cast<std::size_t>(cfg.retrain_every) == 0) {
      usable = detail::retrain(result.theta, ledger, cfg.training, k, false);
      if (!usable) ++result.training_failures;
    }
  }
  return result;
}

}  // namespace dnnaif
