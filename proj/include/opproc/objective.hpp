#pragma once

#include <optional>
#include <string>

#include "opproc/constraints.hpp"
#include "opproc/market.hpp"
#include "opproc/paths.hpp"
#include "opproc/preferences.hpp"

namespace opproc {

/// The deterministic concave objective of the Levy case,
///   g(y) = y^T b + (p-1)/2 y^T c y + sum_atoms lambda {(1 + y^T x)^p / p - 1/p - y^T h(x)},
/// restricted to `domain`. It does not depend on initial capital.
struct GFunction {
  LevyMarket market;
  double p;
  ConstraintSet domain;

  /// Domain is constraint_set(market, user).
  static GFunction make(const LevyMarket& market, const Preferences& prefs,
                        const std::optional<ConstraintSet>& user = std::nullopt);
};

enum class MaxStatus { Interior, Boundary, UnboundedAbove };

const char* to_string(MaxStatus status);

struct MaximizerResult {
  Vector argmax;
  double value = 0.0;
  MaxStatus status = MaxStatus::Interior;
  /// |g'| at an interior point, projected gradient norm on the active face otherwise.
  double first_order_residual = 0.0;
  int iterations = 0;
};

/// Extended-real value; -inf outside the domain.
double g_eval(const GFunction& f, const Vector& y);
double g_eval(const GFunction& f, double y);

/// Analytic gradient and Hessian. Throw DomainBoundary unless 1 + y^T x > 1e-14 for every jump.
Vector g_grad(const GFunction& f, const Vector& y);
Matrix g_hess(const GFunction& f, const Vector& y);

/// Maximizes g over the domain. Dim 1: derivative-sign bracketing, golden section to width
/// 1e-10, Newton polish. Dim > 1: active-set projected Newton with backtracking.
/// Ties (flat maximizer sets) resolve to the smallest-norm point.
MaximizerResult g_max(const GFunction& f);

struct GridScanResult {
  double argmax = 0.0;
  double value = 0.0;
};

/// Maximum of g over n equally spaced points of [lo, hi] (dim 1). The parallel kernel reduces
/// fixed-size chunks in index order, so both executions return the same point.
GridScanResult g_grid_scan(const GFunction& f, double lo, double hi, std::size_t n,
                           Execution exec = Execution::Parallel);

}  // namespace opproc
