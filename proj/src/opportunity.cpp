#include "opproc/opportunity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "opproc/errors.hpp"

namespace opproc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSmallA = 1e-8;
constexpr double kBoundTol = 1e-9;

OpportunityCurve base_curve(const TimeGrid& grid, double p, ConsumptionMode mode, CurveSource source) {
  if (grid.n_steps < 1 || !(grid.horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "invalid time grid");
  OpportunityCurve c;
  c.grid = grid;
  c.p = p;
  c.mode = mode;
  c.source = source;
  c.L.resize(grid.n_points());
  return c;
}

void finish(OpportunityCurve& c, const PiecewiseDiscount& discount) {
  const double beta = 1.0 / (1.0 - c.p);
  c.Lstar.resize(c.L.size());
  c.kappa.resize(c.L.size());
  for (std::size_t k = 0; k < c.L.size(); ++k) {
    c.Lstar[k] = std::pow(c.L[k], beta);
    if (c.mode == ConsumptionMode::WithConsumption)
      c.kappa[k] = std::pow(discount(c.time(k)) / c.L[k], beta);
    else
      c.kappa[k] = k + 1 == c.L.size() ? 1.0 : 0.0;
  }
}

// dL/dtau with tau = T - t running backwards
double ode_rhs(double L, double pg, double p, double q, double d_beta, bool consumes) {
  return pg * L + (consumes ? (1.0 - p) * d_beta * std::pow(L, q) : 0.0);
}

double rk4(double L, double h, double pg, double p, double q, double d_beta, bool consumes) {
  const double k1 = ode_rhs(L, pg, p, q, d_beta, consumes);
  const double k2 = ode_rhs(L + 0.5 * h * k1, pg, p, q, d_beta, consumes);
  const double k3 = ode_rhs(L + 0.5 * h * k2, pg, p, q, d_beta, consumes);
  const double k4 = ode_rhs(L + h * k3, pg, p, q, d_beta, consumes);
  return L + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

double OpportunityCurve::L_at(double t) const {
  const double x = std::clamp(t / grid.dt(), 0.0, static_cast<double>(grid.n_steps));
  const auto k = std::min(static_cast<std::size_t>(x), L.size() - 2);
  const double w = x - static_cast<double>(k);
  return (1.0 - w) * L[k] + w * L[k + 1];
}

double a_param(double gbar, double p) {
  if (!std::isfinite(gbar)) throw Error(ErrorCode::InvalidArgument, "max g must be finite");
  return p * gbar / (1.0 - p);
}

OpportunityCurve L_closed_form(double a, double p, const TimeGrid& grid) {
  if (!(a > -1.0)) throw Error(ErrorCode::InvalidA, "a <= -1 leaves the closed-form bracket nonpositive");
  OpportunityCurve c = base_curve(grid, p, ConsumptionMode::WithConsumption, CurveSource::ClosedForm);
  c.a_param = a;
  for (std::size_t k = 0; k < c.L.size(); ++k) {
    const double tau = grid.horizon - c.time(k);
    double f;
    if (std::abs(a) < kSmallA) {
      f = 1.0 + tau;
    } else {
      f = std::expm1(a * tau) / a + std::exp(a * tau);
    }
    c.L[k] = std::pow(f, 1.0 - p);
  }
  finish(c, PiecewiseDiscount::constant(grid.horizon));
  return c;
}

OpportunityCurve L_terminal_only(double gbar, double p, const TimeGrid& grid) {
  OpportunityCurve c = base_curve(grid, p, ConsumptionMode::TerminalOnly, CurveSource::ClosedForm);
  c.a_param = a_param(gbar, p);
  for (std::size_t k = 0; k < c.L.size(); ++k) c.L[k] = std::exp(p * gbar * (grid.horizon - c.time(k)));
  finish(c, PiecewiseDiscount::constant(grid.horizon));
  return c;
}

OpportunityCurve L_ode_solve(double gbar, const Preferences& prefs, const TimeGrid& grid) {
  const double p = prefs.p();
  const double q = prefs.q();
  const double beta = prefs.beta();
  const auto& D = prefs.discount();
  if (std::abs(grid.horizon - D.horizon()) > 1e-12 * grid.horizon)
    throw Error(ErrorCode::InvalidArgument, "grid and discount horizons differ");
  OpportunityCurve c = base_curve(grid, p, prefs.mode(), CurveSource::ODE);
  c.a_param = a_param(gbar, p);
  const double pg = p * gbar;
  const bool consumes = prefs.consumes();
  const double T = grid.horizon;
  const double max_step = T / 2000.0;

  // mesh = grid points plus breakpoints; D is constant on each [s_j, s_{j+1})
  std::set<double> cuts;
  for (std::size_t k = 0; k < c.L.size(); ++k) cuts.insert(c.time(k));
  for (double b : D.breakpoints())
    if (b > 0.0 && b < T) cuts.insert(b);
  std::vector<double> mesh(cuts.begin(), cuts.end());

  double L = D.terminal();
  c.L.back() = L;
  std::size_t next_out = c.L.size() - 1;  // grid index matching mesh.back() == T
  for (std::size_t j = mesh.size() - 1; j > 0; --j) {
    const double t_hi = mesh[j];
    const double t_lo = mesh[j - 1];
    const double d_beta = std::pow(D(t_lo), beta);
    int n_sub = std::max(1, static_cast<int>(std::ceil((t_hi - t_lo) / max_step - 1e-9)));
    double L_next = L;
    bool ok = false;
    for (int attempt = 0; attempt <= 10; ++attempt) {
      const double h = (t_hi - t_lo) / n_sub;
      L_next = L;
      ok = true;
      for (int s = 0; s < n_sub; ++s) {
        L_next = rk4(L_next, h, pg, p, q, d_beta, consumes);
        if (!(L_next > 0.0) || !std::isfinite(L_next)) {
          ok = false;
          break;
        }
      }
      if (ok) break;
      n_sub *= 2;
    }
    if (!ok) throw Error(ErrorCode::StepPositivityLoss, "RK4 step lost positivity after 10 halvings");
    L = L_next;
    if (next_out > 0 && std::abs(c.time(next_out - 1) - t_lo) <= 1e-12 * T) {
      --next_out;
      c.L[next_out] = L;
    }
  }
  finish(c, D);
  return c;
}

std::vector<double> kappa_hat(const OpportunityCurve& curve, const Preferences& prefs) {
  std::vector<double> out(curve.size());
  const double beta = prefs.beta();
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!(curve.L[k] > 0.0)) throw Error(ErrorCode::InvalidArgument, "opportunity process must be positive");
    if (prefs.consumes())
      out[k] = std::pow(prefs.discount()(curve.time(k)) / curve.L[k], beta);
    else
      out[k] = k + 1 == out.size() ? 1.0 : 0.0;
  }
  return out;
}

BoundReport bounds_check(const OpportunityCurve& curve, const Preferences& prefs) {
  const double p = prefs.p();
  const double T = curve.grid.horizon;
  const auto& D = prefs.discount();
  BoundReport r;
  r.min_slack = kInf;
  bool strict = true;
  bool equal = true;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const double t = curve.time(k);
    const double mass = prefs.clock_mass(t);
    const double expected_D = (prefs.consumes() ? D.integral(t, T) : 0.0) + D.terminal();
    const double bound = std::pow(mass, -p) * expected_D;
    const double L = curve.L[k];
    const double scale = std::max(1.0, std::abs(bound));
    double slack;
    if (p > 0.0) {
      r.bound_lo.push_back(bound);
      r.bound_hi.push_back(kInf);
      slack = L - bound;
      if (L < D.k1() - kBoundTol * std::max(1.0, D.k1())) r.uniform_holds = false;
    } else {
      r.bound_lo.push_back(0.0);
      r.bound_hi.push_back(bound);
      slack = bound - L;
      if (L > D.k2() * std::pow(mass, 1.0 - p) * (1.0 + kBoundTol)) r.uniform_holds = false;
    }
    r.t.push_back(t);
    r.slack.push_back(slack);
    r.min_slack = std::min(r.min_slack, slack / scale);
    r.max_abs_slack = std::max(r.max_abs_slack, std::abs(slack) / scale);
    if (slack < -kBoundTol * scale) r.holds = false;
    if (std::abs(slack) > kBoundTol * scale) equal = false;
    if (k + 1 < curve.size() && !(slack > kBoundTol * scale)) strict = false;
  }
  r.equality = equal;
  r.strict = strict;
  return r;
}

ThresholdReport threshold_check(const OpportunityCurve& curve, const Preferences& prefs) {
  const double p = prefs.p();
  const double T = curve.grid.horizon;
  // p > 0: (k2/k1)^beta from L >= k1 mu°^{1-p}; p < 0: (k1/k2)^beta from L <= k2 mu°^{1-p}
  const double k_ratio = prefs.discount().k2() / prefs.discount().k1();
  const double ratio = std::pow(p > 0.0 ? k_ratio : 1.0 / k_ratio, prefs.beta());
  ThresholdReport r;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const double th = ratio / (1.0 + T - curve.time(k));
    r.threshold.push_back(th);
    const double gap = p > 0.0 ? th - curve.kappa[k] : curve.kappa[k] - th;
    r.max_gap = std::max(r.max_gap, std::abs(gap));
    if (gap < 0.0) r.max_violation = std::max(r.max_violation, -gap);
    if (gap < -kBoundTol * std::max(1.0, th)) r.holds = false;
  }
  return r;
}

void write_curve_csv(std::ostream& out, const OpportunityCurve& curve, const BoundReport& bounds) {
  out << "t,L,Lstar,kappa,bound_lo,bound_hi\n";
  out.precision(17);
  for (std::size_t k = 0; k < curve.size(); ++k) {
    out << curve.time(k) << ',' << curve.L[k] << ',' << curve.Lstar[k] << ',' << curve.kappa[k] << ','
        << bounds.bound_lo[k] << ',';
    if (std::isfinite(bounds.bound_hi[k])) out << bounds.bound_hi[k];
    else out << "inf";
    out << '\n';
  }
}

}  // namespace opproc
