#pragma once

#include <optional>
#include <vector>

#include "opproc/market.hpp"

namespace opproc {

/// normal^T y <= offset
struct Halfspace {
  Vector normal;
  double offset = 0.0;
};

/// Closed convex set of admissible portfolio proportions: a box intersected with halfspaces.
/// Always contains the origin.
struct ConstraintSet {
  Vector lower;
  Vector upper;
  std::vector<Halfspace> halfspaces;

  static ConstraintSet unconstrained(int dim);
  static ConstraintSet box(Vector lower, Vector upper);
  static ConstraintSet interval(double lo, double hi);

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vector& y, double tol = 0.0) const;
  bool bounded() const;
  /// Coordinates pinned by lower == upper.
  bool pinned(int i) const { return lower[i] == upper[i]; }
};

/// C0 = {y : y^T x >= -1 for every jump x}, intersected with `user`.
/// Throws EmptyInterior when the result has no interior, except for coordinates the user box
/// pins explicitly (lower == upper, e.g. the no-trade set {0}).
ConstraintSet constraint_set(const LevyMarket& market,
                             const std::optional<ConstraintSet>& user = std::nullopt);

}  // namespace opproc
