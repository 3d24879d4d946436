#include "opproc/constraints.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "opproc/errors.hpp"
#include "opproc/rng.hpp"

namespace opproc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// True if some direction d (zero on pinned coordinates) strictly enters every constraint that
// is tight at the origin. Constraints with slack at the origin never block the interior.
bool has_interior(const ConstraintSet& set) {
  const int n = set.dim();
  std::vector<Halfspace> tight;
  for (int i = 0; i < n; ++i) {
    if (set.pinned(i)) continue;
    if (set.lower[i] == 0.0) {
      Halfspace h{Vector::Zero(n), 0.0};
      h.normal[i] = -1.0;
      tight.push_back(h);
    }
    if (set.upper[i] == 0.0) {
      Halfspace h{Vector::Zero(n), 0.0};
      h.normal[i] = 1.0;
      tight.push_back(h);
    }
  }
  for (const auto& h : set.halfspaces) {
    if (h.offset == 0.0) tight.push_back(h);
  }
  if (tight.empty()) return true;

  auto mask = [&](Vector d) {
    for (int i = 0; i < n; ++i)
      if (set.pinned(i)) d[i] = 0.0;
    return d;
  };
  auto strictly_inside = [&](const Vector& d) {
    if (d.norm() == 0.0) return false;
    for (const auto& h : tight)
      if (!(h.normal.dot(d) < 0.0)) return false;
    return true;
  };
  Vector guess = Vector::Zero(n);
  for (const auto& h : tight) guess -= h.normal / std::max(h.normal.norm(), 1e-300);
  if (strictly_inside(mask(guess))) return true;
  // Deterministic random search; enough for the low dimensions handled here.
  SubstreamRng rng(0x5eedULL, static_cast<std::uint64_t>(n));
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 4096; ++trial) {
    Vector d(n);
    for (int i = 0; i < n; ++i) d[i] = normal(rng);
    if (strictly_inside(mask(d))) return true;
  }
  return false;
}

}  // namespace

ConstraintSet ConstraintSet::unconstrained(int dim) {
  return {Vector::Constant(dim, -kInf), Vector::Constant(dim, kInf), {}};
}

ConstraintSet ConstraintSet::box(Vector lower, Vector upper) {
  if (lower.size() != upper.size()) throw Error(ErrorCode::InvalidArgument, "box bounds differ in size");
  return {std::move(lower), std::move(upper), {}};
}

ConstraintSet ConstraintSet::interval(double lo, double hi) {
  return box(Vector::Constant(1, lo), Vector::Constant(1, hi));
}

bool ConstraintSet::contains(const Vector& y, double tol) const {
  for (int i = 0; i < dim(); ++i)
    if (y[i] < lower[i] - tol || y[i] > upper[i] + tol) return false;
  for (const auto& h : halfspaces)
    if (h.normal.dot(y) > h.offset + tol) return false;
  return true;
}

bool ConstraintSet::bounded() const { return lower.allFinite() && upper.allFinite(); }

ConstraintSet constraint_set(const LevyMarket& market, const std::optional<ConstraintSet>& user) {
  const int n = market.dim();
  ConstraintSet out = ConstraintSet::unconstrained(n);

  if (n == 1) {
    double max_pos = 0.0;
    double min_neg = 0.0;
    for (const auto& atom : market.jumps().atoms) {
      max_pos = std::max(max_pos, atom.size[0]);
      min_neg = std::min(min_neg, atom.size[0]);
    }
    if (const auto& d = market.jumps().density) {
      max_pos = std::max(max_pos, d->hi);
      min_neg = std::min(min_neg, d->lo);
    }
    if (max_pos > 0.0) out.lower[0] = std::isfinite(max_pos) ? -1.0 / max_pos : 0.0;
    if (min_neg < 0.0) out.upper[0] = std::isfinite(min_neg) ? 1.0 / -min_neg : 0.0;
  } else {
    for (const auto& atom : market.effective_atoms()) out.halfspaces.push_back({-atom.size, 1.0});
  }

  if (user) {
    if (user->dim() != n) throw Error(ErrorCode::InvalidArgument, "constraint dimension mismatch");
    if (!user->contains(Vector::Zero(n)))
      throw Error(ErrorCode::InvalidArgument, "user constraint set must contain the origin");
    out.lower = out.lower.cwiseMax(user->lower);
    out.upper = out.upper.cwiseMin(user->upper);
    for (const auto& h : user->halfspaces) {
      if (h.normal.size() != n) throw Error(ErrorCode::InvalidArgument, "halfspace dimension mismatch");
      out.halfspaces.push_back(h);
    }
  }

  for (int i = 0; i < n; ++i) {
    if (out.lower[i] > out.upper[i]) throw Error(ErrorCode::EmptyInterior, "constraint bounds cross");
    if (out.pinned(i) && !(user && user->pinned(i)))
      throw Error(ErrorCode::EmptyInterior, "constraint set collapses along a coordinate");
  }
  if (!has_interior(out)) throw Error(ErrorCode::EmptyInterior, "constraint set has no interior");
  if (!out.contains(Vector::Zero(n))) throw Error(ErrorCode::EmptyInterior, "constraint set misses the origin");
  return out;
}

}  // namespace opproc
