#pragma once

#include <vector>

namespace opproc {

enum class ConsumptionMode { TerminalOnly, WithConsumption };

/// Deterministic right-continuous step function D on [0, T].
/// Piece i holds `values[i]` on [breakpoints[i], breakpoints[i+1]); the last piece runs to T
/// inclusive. A final breakpoint equal to T sets a separate terminal weight D_T.
class PiecewiseDiscount {
 public:
  static PiecewiseDiscount constant(double horizon, double value = 1.0);
  static PiecewiseDiscount create(double horizon, std::vector<double> breakpoints,
                                  std::vector<double> values);

  double operator()(double t) const;
  double horizon() const { return horizon_; }
  double terminal() const { return values_.back(); }
  double k1() const;
  double k2() const;
  /// Integral of D over [a, b] against Lebesgue measure.
  double integral(double a, double b) const;
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& values() const { return values_; }
  bool is_constant() const;

  /// (1 + xi) D on [t1, t2) for a nonincreasing step xi given on the same breakpoints as
  /// `xi_breakpoints` (values `xi_values`); used for the tax-window comparison.
  PiecewiseDiscount scaled_window(double t1, double t2, std::vector<double> xi_breakpoints,
                                  std::vector<double> xi_values) const;

 private:
  PiecewiseDiscount() = default;

  double horizon_ = 1.0;
  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

/// Power utility U_t(x) = D_t x^p / p. beta and q are derived from p on every call.
class Preferences {
 public:
  static Preferences create(double p, PiecewiseDiscount discount,
                            ConsumptionMode mode = ConsumptionMode::WithConsumption);

  double p() const { return p_; }
  double beta() const { return 1.0 / (1.0 - p_); }
  double q() const { return p_ / (p_ - 1.0); }
  const PiecewiseDiscount& discount() const { return discount_; }
  ConsumptionMode mode() const { return mode_; }
  bool consumes() const { return mode_ == ConsumptionMode::WithConsumption; }
  double horizon() const { return discount_.horizon(); }

  /// mu°[t, T] = mu[t, T] + 1.
  double clock_mass(double t) const;
  double utility(double t, double x) const;

  Preferences with_p(double p) const;
  Preferences with_discount(PiecewiseDiscount discount) const;

 private:
  Preferences(double p, PiecewiseDiscount discount, ConsumptionMode mode)
      : p_(p), discount_(std::move(discount)), mode_(mode) {}

  double p_;
  PiecewiseDiscount discount_;
  ConsumptionMode mode_;
};

}  // namespace opproc
