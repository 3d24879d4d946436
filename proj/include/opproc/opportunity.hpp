#pragma once

#include <iosfwd>
#include <vector>

#include "opproc/grid.hpp"
#include "opproc/preferences.hpp"

namespace opproc {

enum class CurveSource { ClosedForm, ODE };

/// Deterministic opportunity process on a uniform grid, with the dual opportunity process
/// Lstar = L^beta and the optimal propensity to consume kappa = (D / L)^beta.
struct OpportunityCurve {
  TimeGrid grid;
  std::vector<double> L;
  std::vector<double> Lstar;
  std::vector<double> kappa;
  double a_param = 0.0;
  double p = 0.5;
  ConsumptionMode mode = ConsumptionMode::WithConsumption;
  CurveSource source = CurveSource::ClosedForm;

  double time(std::size_t k) const { return grid.time(static_cast<int>(k)); }
  std::size_t size() const { return L.size(); }
  /// Linear interpolation of L between grid points.
  double L_at(double t) const;
};

/// a = p gbar / (1 - p).
double a_param(double gbar, double p);

/// L_t = a^{p-1} [(1 + a) e^{a(T-t)} - 1]^{1-p} with consumption and D == 1, evaluated as
/// L = f^{1-p}, f = expm1(a tau)/a + e^{a tau}. Uses (1 + T - t)^{1-p} when |a| < 1e-8.
/// Throws InvalidA for a <= -1.
OpportunityCurve L_closed_form(double a, double p, const TimeGrid& grid);

/// Terminal-wealth problem with D == 1: L_t = exp(p gbar (T - t)); kappa = 0 before T.
OpportunityCurve L_terminal_only(double gbar, double p, const TimeGrid& grid);

/// Backward RK4 for L' = -p gbar L - (1 - p) D^beta L^q (consumption term dropped without
/// intermediate consumption), L_T = D_T. Steps are at most T/2000 and aligned with the
/// discount breakpoints; a step that loses positivity is halved up to 10 times before
/// StepPositivityLoss is thrown.
OpportunityCurve L_ode_solve(double gbar, const Preferences& prefs, const TimeGrid& grid);

/// kappa_t = (D_t / L_t)^beta with consumption; 0 before T and 1 at T otherwise.
std::vector<double> kappa_hat(const OpportunityCurve& curve, const Preferences& prefs);

/// Deterministic no-trade comparison bounds on L:
///   p in (0,1):  L_t >= mu°[t,T]^{-p} (int_t^T D mu(ds) + D_T)  and  L >= k1
///   p < 0:       L_t <= mu°[t,T]^{-p} (int_t^T D mu(ds) + D_T)  and  L_t <= k2 mu°[t,T]^{1-p}
struct BoundReport {
  std::vector<double> t;
  std::vector<double> bound_lo;  // -inf-free: 0 when no lower bound applies
  std::vector<double> bound_hi;  // +inf when no upper bound applies
  std::vector<double> slack;     // signed distance to the comparison bound, >= 0 when it holds
  double min_slack = 0.0;
  double max_abs_slack = 0.0;
  bool holds = true;
  bool uniform_holds = true;
  /// slack <= 1e-9 (relative) everywhere
  bool equality = false;
  /// slack > 1e-9 (relative) for every t < T
  bool strict = false;
};

BoundReport bounds_check(const OpportunityCurve& curve, const Preferences& prefs);

/// kappa_t <= (k2/k1)^beta / (1 + T - t) for p in (0,1); kappa_t >= (k1/k2)^beta / (1 + T - t) for p < 0.
struct ThresholdReport {
  std::vector<double> threshold;
  double max_violation = 0.0;
  double max_gap = 0.0;
  bool holds = true;
};

ThresholdReport threshold_check(const OpportunityCurve& curve, const Preferences& prefs);

/// Columns t,L,Lstar,kappa,bound_lo,bound_hi.
void write_curve_csv(std::ostream& out, const OpportunityCurve& curve, const BoundReport& bounds);

}  // namespace opproc
