#include "dnnaif/stencil.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

namespace dnnaif {

std::string_view to_string(DirectionKind kind) {
  switch (kind) {
    case DirectionKind::Coordinate: return "coordinate";
    case DirectionKind::SphereUniform: return "sphere-uniform";
    case DirectionKind::Rademacher: return "rademacher";
  }
  return "coordinate";
}

DirectionKind direction_kind_from_string(std::string_view name) {
  if (name == "coordinate") return DirectionKind::Coordinate;
  if (name == "sphere-uniform" || name == "sphere") return DirectionKind::SphereUniform;
  if (name == "rademacher") return DirectionKind::Rademacher;
  throw Error(ErrorKind::ValidationError, "unknown direction kind '" + std::string(name) + "'");
}

DirectionSet coordinate_directions(int n) {
  DirectionSet set;
  set.kind = DirectionKind::Coordinate;
  set.directions.reserve(static_cast<std::size_t>(2 * n));
  for (int sign : {1, -1}) {
    for (int i = 0; i < n; ++i) {
      Vector e = Vector::Zero(n);
      e[i] = sign;
      set.directions.push_back(std::move(e));
    }
  }
  return set;
}

DirectionSet sphere_directions(int n, int count, Rng& rng) {
  DirectionSet set;
  set.kind = DirectionKind::SphereUniform;
  set.directions.reserve(static_cast<std::size_t>(count));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int j = 0; j < count; ++j) {
    Vector w(n);
    double norm = 0.0;
    // Rejecting a zero draw keeps the result on the sphere; it never happens in practice.
    do {
      for (int i = 0; i < n; ++i) w[i] = normal(rng);
      norm = w.norm();
    } while (norm == 0.0);
    set.directions.push_back(w / norm);
  }
  return set;
}

DirectionSet rademacher_directions(int n, int count, Rng& rng) {
  DirectionSet set;
  set.kind = DirectionKind::Rademacher;
  set.directions.reserve(static_cast<std::size_t>(count));
  std::bernoulli_distribution coin(0.5);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int j = 0; j < count; ++j) {
    Vector w(n);
    for (int i = 0; i < n; ++i) w[i] = coin(rng) ? scale : -scale;
    set.directions.push_back(std::move(w));
  }
  return set;
}

DirectionSet draw_directions(DirectionKind kind, int n, int count, Rng& rng) {
  switch (kind) {
    case DirectionKind::SphereUniform: return sphere_directions(n, count, rng);
    case DirectionKind::Rademacher: return rademacher_directions(n, count, rng);
    case DirectionKind::Coordinate: break;
  }
  const DirectionSet full = coordinate_directions(n);
  DirectionSet set;
  set.kind = DirectionKind::Coordinate;
  for (int j = 0; j < count; ++j) {
    set.directions.push_back(full.directions[static_cast<std::size_t>(j) % full.size()]);
  }
  return set;
}

std::vector<Vector> stencil_points(const Vector& x, double h, const DirectionSet& dirs) {
  std::vector<Vector> points;
  points.reserve(dirs.size());
  for (const Vector& w : dirs.directions) {
    if (w.size() != x.size()) {
      throw Error(ErrorKind::DimensionMismatch, "direction and center dimensions differ");
    }
    points.push_back(x + h * w);
  }
  return points;
}

double nonnegative_residual(const DirectionSet& dirs, const Vector& target, double tol) {
  const Eigen::Index n = target.size();
  const auto J = static_cast<Eigen::Index>(dirs.size());
  Matrix W(n, J);
  for (Eigen::Index j = 0; j < J; ++j) W.col(j) = dirs.directions[static_cast<std::size_t>(j)];

  // Accelerated projected gradient on 1/2 ||W a - t||^2 subject to a >= 0.
  const Matrix gram = W.transpose() * W;
  const Vector wt = W.transpose() * target;
  const double lipschitz =
      Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  if (!(lipschitz > 0.0)) return target.norm();
  const double step = 1.0 / lipschitz;
  const double tol2 = tol * tol;

  Vector a = Vector::Zero(J);
  Vector y = a;
  double momentum = 1.0;
  auto objective = [&](const Vector& v) { return 0.5 * (W * v - target).squaredNorm(); };
  double current = objective(a);
  bool restarted = false;
  constexpr int kMaxIterations = 200000;
  for (int it = 0; it < kMaxIterations && 2.0 * current > tol2; ++it) {
    const Vector grad = gram * y - wt;
    Vector next = (y - step * grad).cwiseMax(0.0);
    const double value = objective(next);
    if (value > current) {
      // Restart the momentum when it stops paying off; a plain step that
      // still ascends means we are at rounding level.
      if (restarted) break;
      restarted = true;
      momentum = 1.0;
      y = a;
      continue;
    }
    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    restarted = false;
    const double change = (next - a).norm();
    y = next + ((momentum - 1.0) / next_momentum) * (next - a);
    a = std::move(next);
    momentum = next_momentum;
    current = value;
    if (change <= tol2 * std::max(1.0, a.norm())) break;
  }
  return std::sqrt(2.0 * current);
}

bool is_positive_spanning(const DirectionSet& dirs, double tol) {
  if (dirs.empty()) throw Error(ErrorKind::EmptyInput, "direction set is empty");
  const Eigen::Index n = dirs.directions.front().size();
  for (const Vector& w : dirs.directions) {
    if (w.size() != n) throw Error(ErrorKind::DimensionMismatch, "ragged direction set");
  }
  for (int sign : {1, -1}) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector target = Vector::Zero(n);
      target[i] = sign;
      if (nonnegative_residual(dirs, target, tol) > tol) return false;
    }
  }
  return true;
}

double kappa_coordinate(int n) { return std::sqrt(static_cast<double>(n)); }

double noise_local_norm(std::span<const double> phi_values) {
  if (phi_values.empty()) throw Error(ErrorKind::EmptyInput, "no noise values");
  double norm = 0.0;
  for (double phi : phi_values) norm = std::max(norm, std::abs(phi));
  return norm;
}

double stencil_failure_bound(double kappa, double lipschitz, double h, double phi_norm) {
  return kappa * (lipschitz * h / 2.0 + phi_norm / h);
}

}  // namespace dnnaif
