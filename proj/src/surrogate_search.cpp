#include <algorithm>
#include <cmath>

#include "dnnaif/optimize.hpp"

namespace dnnaif {

ArmijoResult armijo_search(const std::function<double(const Vector&)>& value_fn, const Vector& x,
                           const Vector& g, const ArmijoConfig& cfg) {
  const double f0 = value_fn(x);
  const double slope = g.squaredNorm();
  double mu = cfg.mu0;
  for (int i = 0; i <= cfg.max_backtracks; ++i) {
    const double trial = value_fn(x - mu * g);
    if (trial <= f0 - cfg.c * mu * slope) return {mu, true};
    mu *= cfg.backtrack;
  }
  return {0.0, false};
}

SurrogateModel network_model(const NetworkParams& theta) {
  return {[&theta](const Vector& x) { return surrogate_value(theta, x); },
          [&theta](const Vector& x) { return grad_x(theta, x); }};
}

Vector surrogate_descent(const Vector& x_k, const SurrogateModel& model, int s, double h,
                         const ArmijoConfig& armijo) {
  Vector x = x_k;
  for (int step = 0; step < s; ++step) {
    const Vector g = model.gradient(x);
    const double g_norm = g.norm();
    if (!(g_norm > 0.0) || !std::isfinite(g_norm)) break;
    ArmijoConfig trial = armijo;
    if (std::isfinite(h)) trial.mu0 = std::min(armijo.mu0, h / g_norm);
    const ArmijoResult ls = armijo_search(model.value, x, g, trial);
    if (!ls.accepted) break;
    Vector next = x - ls.mu * g;
    if ((next - x_k).norm() > h) break;
    x = std::move(next);
  }
  return x;
}

Vector surrogate_descent(const Vector& x_k, const NetworkParams& theta, int s, double h,
                         const ArmijoConfig& armijo) {
  return surrogate_descent(x_k, network_model(theta), s, h, armijo);
}

FilteredSample filtered_sampling(const Vector& x_k, double f_k, double h,
                                 const std::function<double(const Vector&)>& model_value,
                                 int n_f, int n_s, DirectionKind kind, Rng& rng) {
  FilteredSample sample;
  const auto n = static_cast<int>(x_k.size());
  // The coordinate kind is a fixed cycle; draw it once so that draw j uses w_j.
  const DirectionSet coordinate = kind == DirectionKind::Coordinate
                                      ? draw_directions(kind, n, std::max(n_s, 0), rng)
                                      : DirectionSet{};
  int accepted = 0;
  while (accepted < n_f && sample.draws < n_s) {
    const Vector w = kind == DirectionKind::Coordinate
                         ? coordinate.directions[static_cast<std::size_t>(sample.draws)]
                         : draw_directions(kind, n, 1, rng).directions.front();
    ++sample.draws;
    Vector candidate = x_k + h * w;
    const double predicted = model_value(candidate);
    if (predicted <= f_k) {
      sample.points.push_back(std::move(candidate));
      sample.surrogate_values.push_back(predicted);
      ++accepted;
    }
  }
  return sample;
}

std::pair<int, int> exploration_schedule(std::size_t k, int n_total,
                                         const ExplorationSchedule& schedule) {
  if (n_total < 1) throw Error(ErrorKind::ValidationError, "n_total must be positive");
  double fraction = schedule.final_fraction;
  if (schedule.decay_iterations > 0 && k < static_cast<std::size_t>(schedule.decay_iterations)) {
    const double t = static_cast<double>(k) / static_cast<double>(schedule.decay_iterations);
    fraction = schedule.initial_fraction + (schedule.final_fraction - schedule.initial_fraction) * t;
  }
  fraction = std::clamp(fraction, 0.0, 1.0);
  auto n_e = static_cast<int>(std::lround(fraction * n_total));
  if (fraction > 0.0) n_e = std::max(n_e, 1);
  n_e = std::min(n_e, n_total);
  return {n_e, n_total - n_e};
}

}  // namespace dnnaif
