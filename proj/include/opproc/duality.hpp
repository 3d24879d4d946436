#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "opproc/grid.hpp"
#include "opproc/opportunity.hpp"
#include "opproc/paths.hpp"
#include "opproc/preferences.hpp"

namespace opproc {

/// Per-path values of a positive process on a grid, row-major. Rejected rows are NaN.
struct ProcessPaths {
  TimeGrid grid;
  std::size_t n_paths = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> rejected;

  ProcessPaths() = default;
  ProcessPaths(TimeGrid g, std::size_t n)
      : grid(g), n_paths(n), values(n * g.n_points()), rejected(n, 0) {}

  std::span<double> path(std::size_t i) { return {values.data() + i * grid.n_points(), grid.n_points()}; }
  std::span<const double> path(std::size_t i) const {
    return {values.data() + i * grid.n_points(), grid.n_points()};
  }
  std::size_t n_rejected() const;
};

/// U*_t(y) = -(1/q) y^q D_t^beta. Throws InvalidArgument unless y > 0.
double u_star(double y, double t, const Preferences& prefs);

struct DualState {
  double y0 = 0.0;
  ProcessPaths Y;
  /// -(1/q) y0^q L*_0
  double dual_value = 0.0;
  /// max over retained paths and grid points of |Y - D c^{p-1}| / Y where c > 0
  double identity_discrepancy = 0.0;
};

/// Y_t = L_t X_t^{p-1} pathwise from a bundle simulated under the optimal strategy.
DualState dual_process(const OpportunityCurve& curve, const PathBundle& wealth, const Preferences& prefs);

struct ConjugacyReport {
  double u = 0.0;          // L_0 x0^p / p
  double y0 = 0.0;         // L_0 x0^{p-1}
  double dual_value = 0.0; // -(1/q) y0^q L_0^beta
  double rhs = 0.0;        // u - x0 y0
  double relative_gap = 0.0;
  bool passed = false;
};

ConjugacyReport conjugacy_check(double L0, const Preferences& prefs, double x0);
ConjugacyReport conjugacy_check(const OpportunityCurve& curve, const Preferences& prefs, double x0);

}  // namespace opproc
