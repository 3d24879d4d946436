#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "opproc/preferences.hpp"

namespace opproc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct JumpAtom {
  Vector size;
  double intensity = 0.0;  // per unit time
};

/// Absolutely continuous jump component in dimension one: F(dx) = density(x) dx on [lo, hi].
/// Either end may be infinite; such a density can be validated but not integrated or simulated.
struct JumpDensity {
  std::function<double(double)> density;
  double lo = 0.0;
  double hi = 0.0;
  int nodes = 64;
  std::string label;

  bool bounded() const;
};

struct JumpMeasure {
  std::vector<JumpAtom> atoms;
  std::optional<JumpDensity> density;
};

/// Exponential Levy market: R has triplet (drift, diffusion, jumps) with respect to the
/// cut-off h(x) = x 1{|x| <= 1} (see `cutoff`), and S = E(R).
/// Immutable after `create`; the density part is replaced by Gauss-Legendre atoms for every
/// computation, so integration and simulation see the same discrete measure.
class LevyMarket {
 public:
  static LevyMarket create(Vector drift, Matrix diffusion, JumpMeasure jumps, double horizon);

  /// Pure-diffusion market in one dimension.
  static LevyMarket merton(double drift, double variance, double horizon);

  int dim() const { return static_cast<int>(drift_.size()); }
  const Vector& drift() const { return drift_; }
  const Matrix& diffusion() const { return diffusion_; }
  const JumpMeasure& jumps() const { return jumps_; }
  double horizon() const { return horizon_; }

  /// Atoms plus the quadrature atoms of the density part. Empty when the density is unbounded.
  const std::vector<JumpAtom>& effective_atoms() const { return effective_atoms_; }
  double total_intensity() const { return total_intensity_; }
  /// Integral of h against F; subtracted from the drift in the path increments.
  const Vector& compensator() const { return compensator_; }
  /// Matrix A with A A^T = diffusion.
  const Matrix& volatility() const { return volatility_; }
  bool has_unbounded_density() const;

  LevyMarket with_horizon(double horizon) const;

 private:
  LevyMarket() = default;

  Vector drift_;
  Matrix diffusion_;
  JumpMeasure jumps_;
  double horizon_ = 1.0;
  std::vector<JumpAtom> effective_atoms_;
  double total_intensity_ = 0.0;
  Vector compensator_;
  Matrix volatility_;
};

/// h(x) = x if |x| <= 1 (Euclidean norm), else 0.
Vector cutoff(const Vector& x);
double cutoff(double x);

struct ValidationCheck {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool passed() const;
  const ValidationCheck* find(const std::string& name) const;
};

/// Checks: s_positivity, finite_activity, p_moment (p in (0,1) only), non_monotone.
ValidationReport validate_market(const LevyMarket& market, const Preferences& prefs);

}  // namespace opproc
