#include "opproc/preferences.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "opproc/errors.hpp"

namespace opproc {

PiecewiseDiscount PiecewiseDiscount::constant(double horizon, double value) {
  return create(horizon, {0.0}, {value});
}

PiecewiseDiscount PiecewiseDiscount::create(double horizon, std::vector<double> breakpoints,
                                            std::vector<double> values) {
  if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon T must be positive");
  if (breakpoints.empty() || breakpoints.size() != values.size())
    throw Error(ErrorCode::InvalidArgument, "discount needs one value per breakpoint");
  if (breakpoints.front() != 0.0)
    throw Error(ErrorCode::InvalidArgument, "first discount breakpoint must be 0");
  for (std::size_t i = 1; i < breakpoints.size(); ++i)
    if (!(breakpoints[i] > breakpoints[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "discount breakpoints must be strictly increasing");
  if (breakpoints.back() > horizon)
    throw Error(ErrorCode::InvalidArgument, "discount breakpoints must lie in [0, T]");
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorCode::InvalidArgument, "discount values must be positive and finite");

  PiecewiseDiscount d;
  d.horizon_ = horizon;
  d.breakpoints_ = std::move(breakpoints);
  d.values_ = std::move(values);
  return d;
}

double PiecewiseDiscount::operator()(double t) const {
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  if (it == breakpoints_.begin()) return values_.front();
  return values_[static_cast<std::size_t>(it - breakpoints_.begin()) - 1];
}

double PiecewiseDiscount::k1() const { return *std::min_element(values_.begin(), values_.end()); }

double PiecewiseDiscount::k2() const { return *std::max_element(values_.begin(), values_.end()); }

double PiecewiseDiscount::integral(double a, double b) const {
  a = std::max(a, 0.0);
  b = std::min(b, horizon_);
  double total = 0.0;
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    const double lo = std::max(a, breakpoints_[i]);
    const double hi = std::min(b, i + 1 < breakpoints_.size() ? breakpoints_[i + 1] : horizon_);
    if (hi > lo) total += values_[i] * (hi - lo);
  }
  return total;
}

bool PiecewiseDiscount::is_constant() const {
  return std::all_of(values_.begin(), values_.end(), [&](double v) { return v == values_.front(); });
}

PiecewiseDiscount PiecewiseDiscount::scaled_window(double t1, double t2,
                                                   std::vector<double> xi_breakpoints,
                                                   std::vector<double> xi_values) const {
  if (!(0.0 <= t1 && t1 < t2 && t2 <= horizon_))
    throw Error(ErrorCode::InvalidArgument, "tax window needs 0 <= t1 < t2 <= T");
  if (xi_breakpoints.empty() || xi_breakpoints.size() != xi_values.size() || xi_breakpoints.front() != t1)
    throw Error(ErrorCode::InvalidArgument, "xi steps must start at t1, one value per breakpoint");
  for (std::size_t i = 0; i < xi_values.size(); ++i) {
    if (!(xi_values[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "xi must be positive");
    if (i > 0 && (xi_values[i] > xi_values[i - 1] || !(xi_breakpoints[i] > xi_breakpoints[i - 1])))
      throw Error(ErrorCode::InvalidArgument, "xi must be a nonincreasing step on increasing breakpoints");
    if (xi_breakpoints[i] >= t2) throw Error(ErrorCode::InvalidArgument, "xi breakpoints must lie in [t1, t2)");
  }
  auto xi = [&](double t) {
    if (t < t1 || t >= t2) return 0.0;
    auto it = std::upper_bound(xi_breakpoints.begin(), xi_breakpoints.end(), t);
    return xi_values[static_cast<std::size_t>(it - xi_breakpoints.begin()) - 1];
  };
  std::set<double> cuts(breakpoints_.begin(), breakpoints_.end());
  cuts.insert(t1);
  if (t2 < horizon_) cuts.insert(t2);
  cuts.insert(xi_breakpoints.begin(), xi_breakpoints.end());
  std::vector<double> bps(cuts.begin(), cuts.end());
  std::vector<double> vals;
  vals.reserve(bps.size());
  for (double s : bps) vals.push_back((*this)(s) * (1.0 + xi(s)));
  return create(horizon_, std::move(bps), std::move(vals));
}

Preferences Preferences::create(double p, PiecewiseDiscount discount, ConsumptionMode mode) {
  if (!std::isfinite(p) || p == 0.0 || p >= 1.0)
    throw Error(ErrorCode::InvalidArgument, "p must lie in (-inf, 0) or (0, 1)");
  return Preferences(p, std::move(discount), mode);
}

double Preferences::clock_mass(double t) const {
  return (consumes() ? std::max(horizon() - t, 0.0) : 0.0) + 1.0;
}

double Preferences::utility(double t, double x) const { return discount_(t) * std::pow(x, p_) / p_; }

Preferences Preferences::with_p(double p) const { return create(p, discount_, mode_); }

Preferences Preferences::with_discount(PiecewiseDiscount discount) const {
  return create(p_, std::move(discount), mode_);
}

}  // namespace opproc
