#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "dnnaif/common.hpp"

namespace dnnaif {

enum class DirectionKind { Coordinate, SphereUniform, Rademacher };

std::string_view to_string(DirectionKind kind);
DirectionKind direction_kind_from_string(std::string_view name);

struct DirectionSet {
  std::vector<Vector> directions;
  DirectionKind kind = DirectionKind::Coordinate;

  std::size_t size() const noexcept { return directions.size(); }
  bool empty() const noexcept { return directions.empty(); }
};

/// [e_1, ..., e_n, -e_1, ..., -e_n]
DirectionSet coordinate_directions(int n);

/// count directions drawn uniformly from the unit sphere in R^n.
DirectionSet sphere_directions(int n, int count, Rng& rng);

/// count vectors with independent +-1/sqrt(n) entries.
DirectionSet rademacher_directions(int n, int count, Rng& rng);

/// Directions of the given kind. The coordinate kind is deterministic: it
/// cycles through coordinate_directions(n) and returns the first count of them.
DirectionSet draw_directions(DirectionKind kind, int n, int count, Rng& rng);

/// x + h * w_j for every direction, in order.
std::vector<Vector> stencil_points(const Vector& x, double h, const DirectionSet& dirs);

/// True iff every +-e_i is a nonnegative combination of dirs with residual
/// 2-norm <= tol. Each target is checked with a projected-gradient NNLS solve.
bool is_positive_spanning(const DirectionSet& dirs, double tol = 1e-8);

/// Residual 2-norm of the nonnegative least-squares fit of target by dirs.
double nonnegative_residual(const DirectionSet& dirs, const Vector& target, double tol = 1e-8);

/// Condition number of the coordinate positive spanning set in R^n.
double kappa_coordinate(int n);

/// Largest |phi| over the center and stencil values.
double noise_local_norm(std::span<const double> phi_values);

/// Upper bound on ||grad f_s(x)||_2 implied by a stencil failure:
/// kappa * (L h / 2 + ||phi||_S / h).
double stencil_failure_bound(double kappa, double lipschitz, double h, double phi_norm);

}  // namespace dnnaif
