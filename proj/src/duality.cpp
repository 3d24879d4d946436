#include "opproc/duality.hpp"

#include <algorithm>
#include <cmath>

#include "opproc/errors.hpp"

namespace opproc {

std::size_t ProcessPaths::n_rejected() const {
  return static_cast<std::size_t>(std::count(rejected.begin(), rejected.end(), 1));
}

double u_star(double y, double t, const Preferences& prefs) {
  if (!(y > 0.0)) throw Error(ErrorCode::InvalidArgument, "conjugate needs y > 0");
  const double q = prefs.q();
  return -std::pow(y, q) * std::pow(prefs.discount()(t), prefs.beta()) / q;
}

DualState dual_process(const OpportunityCurve& curve, const PathBundle& wealth, const Preferences& prefs) {
  if (wealth.wealth.empty()) throw Error(ErrorCode::InvalidArgument, "bundle has no wealth paths");
  if (wealth.grid.n_steps != curve.grid.n_steps || wealth.grid.horizon != curve.grid.horizon)
    throw Error(ErrorCode::InvalidArgument, "curve and bundle grids differ");
  const double p = prefs.p();
  const std::size_t np = wealth.grid.n_points();
  DualState s;
  s.Y = ProcessPaths(wealth.grid, wealth.n_paths);
  s.Y.rejected = wealth.rejected;
  const double x0 = wealth.n_paths ? wealth.path_wealth(0)[0] : 1.0;
  s.y0 = curve.L[0] * std::pow(x0, p - 1.0);
  s.dual_value = -std::pow(s.y0, prefs.q()) * curve.Lstar[0] / prefs.q();

  std::vector<double> d(np);
  for (std::size_t k = 0; k < np; ++k) d[k] = prefs.discount()(wealth.grid.time(static_cast<int>(k)));

  double worst = 0.0;
  for (std::size_t i = 0; i < wealth.n_paths; ++i) {
    auto x = wealth.path_wealth(i);
    auto c = wealth.path_consumption(i);
    auto y = s.Y.path(i);
    for (std::size_t k = 0; k < np; ++k) {
      y[k] = curve.L[k] * std::pow(x[k], p - 1.0);
      if (wealth.rejected[i] || !(c[k] > 0.0)) continue;
      const double marginal = d[k] * std::pow(c[k], p - 1.0);
      worst = std::max(worst, std::abs(y[k] - marginal) / y[k]);
    }
  }
  s.identity_discrepancy = worst;
  return s;
}

ConjugacyReport conjugacy_check(double L0, const Preferences& prefs, double x0) {
  if (!(L0 > 0.0) || !(x0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "conjugacy needs L_0 > 0 and x0 > 0");
  const double p = prefs.p();
  const double q = prefs.q();
  ConjugacyReport r;
  r.u = L0 * std::pow(x0, p) / p;
  r.y0 = L0 * std::pow(x0, p - 1.0);
  r.dual_value = -std::pow(r.y0, q) * std::pow(L0, prefs.beta()) / q;
  r.rhs = r.u - x0 * r.y0;
  const double scale = std::max({std::abs(r.dual_value), std::abs(r.rhs), 1e-300});
  r.relative_gap = std::abs(r.dual_value - r.rhs) / scale;
  r.passed = r.relative_gap <= 1e-12;
  return r;
}

ConjugacyReport conjugacy_check(const OpportunityCurve& curve, const Preferences& prefs, double x0) {
  return conjugacy_check(curve.L.front(), prefs, x0);
}

}  // namespace opproc
