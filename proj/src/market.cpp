#include "opproc/market.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include "opproc/errors.hpp"

namespace opproc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct GslTable {
  explicit GslTable(int n) : table(gsl_integration_glfixed_table_alloc(static_cast<std::size_t>(n))) {}
  ~GslTable() { gsl_integration_glfixed_table_free(table); }
  GslTable(const GslTable&) = delete;
  GslTable& operator=(const GslTable&) = delete;
  gsl_integration_glfixed_table* table;
};

std::vector<JumpAtom> quadrature_atoms(const JumpDensity& d) {
  GslTable gl(d.nodes);
  std::vector<JumpAtom> atoms;
  for (int i = 0; i < d.nodes; ++i) {
    double x = 0.0;
    double w = 0.0;
    gsl_integration_glfixed_point(d.lo, d.hi, static_cast<std::size_t>(i), &x, &w, gl.table);
    const double mass = d.density(x) * w;
    if (mass > 0.0 && x != 0.0) atoms.push_back({Vector::Constant(1, x), mass});
  }
  return atoms;
}

double qags(const std::function<double(double)>& f, double a, double b) {
  gsl_function fn;
  fn.function = [](double x, void* params) {
    return (*static_cast<const std::function<double(double)>*>(params))(x);
  };
  fn.params = const_cast<std::function<double(double)>*>(&f);
  gsl_integration_workspace* ws = gsl_integration_workspace_alloc(1000);
  double result = 0.0;
  double abserr = 0.0;
  gsl_error_handler_t* old = gsl_set_error_handler_off();
  gsl_integration_qags(&fn, a, b, 0.0, 1e-10, 1000, ws, &result, &abserr);
  gsl_set_error_handler(old);
  gsl_integration_workspace_free(ws);
  return result;
}

// Integral of f over [start, inf): truncate at start * 10^k and extrapolate the increments.
// Geometric increments with ratio >= 1 are reported as divergence.
struct TailEstimate {
  bool finite = true;
  double value = 0.0;
  double ratio = 0.0;
};

TailEstimate tail_integral(const std::function<double(double)>& f, double start, double stop) {
  TailEstimate est;
  if (stop <= start) return est;
  if (std::isfinite(stop)) {
    est.value = qags(f, start, stop);
    return est;
  }
  constexpr int kDecades = 12;
  double prev_inc = 0.0;
  double lo = start;
  for (int k = 1; k <= kDecades; ++k) {
    const double hi = start * std::pow(10.0, k);
    const double inc = qags(f, lo, hi);
    est.value += inc;
    if (k >= 2 && prev_inc > 0.0) est.ratio = inc / prev_inc;
    prev_inc = inc;
    lo = hi;
  }
  if (prev_inc > 0.0 && est.ratio >= 1.0 - 1e-3) {
    est.finite = false;
    est.value = kInf;
  } else if (prev_inc > 0.0) {
    est.value += prev_inc * est.ratio / (1.0 - est.ratio);
  }
  return est;
}

// Integral of g(x) * density(x) over {x in support : |x| > 1}.
TailEstimate density_outer_integral(const JumpDensity& d, const std::function<double(double)>& g) {
  const std::function<double(double)> f = [&](double x) { return g(x) * d.density(x); };
  const std::function<double(double)> f_neg = [&](double x) { return f(-x); };
  TailEstimate total;
  // right side: (max(lo,1), hi)
  const double r_lo = std::max(d.lo, 1.0);
  if (d.hi > r_lo) {
    const TailEstimate right = tail_integral(f, r_lo, d.hi);
    total.finite = total.finite && right.finite;
    total.value += right.value;
  }
  // left side: (lo, min(hi,-1)) mapped to positive axis
  const double l_hi = std::min(d.hi, -1.0);
  if (l_hi > d.lo) {
    const TailEstimate left = tail_integral(f_neg, -l_hi, -d.lo);
    total.finite = total.finite && left.finite;
    total.value += left.value;
  }
  return total;
}

}  // namespace

bool JumpDensity::bounded() const { return std::isfinite(lo) && std::isfinite(hi); }

Vector cutoff(const Vector& x) { return x.norm() <= 1.0 ? x : Vector::Zero(x.size()); }

double cutoff(double x) { return std::abs(x) <= 1.0 ? x : 0.0; }

LevyMarket LevyMarket::create(Vector drift, Matrix diffusion, JumpMeasure jumps, double horizon) {
  const auto d = drift.size();
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "market dimension must be positive");
  if (diffusion.rows() != d || diffusion.cols() != d)
    throw Error(ErrorCode::InvalidArgument, "diffusion must be a dim x dim matrix");
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw Error(ErrorCode::InvalidArgument, "horizon T must be positive");
  if (!drift.allFinite() || !diffusion.allFinite())
    throw Error(ErrorCode::InvalidArgument, "drift and diffusion must be finite");

  const double scale = std::max(1.0, diffusion.cwiseAbs().maxCoeff());
  if ((diffusion - diffusion.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw Error(ErrorCode::InvalidArgument, "diffusion must be symmetric");
  Matrix sym = 0.5 * (diffusion + diffusion.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  Vector lambda = eig.eigenvalues();
  if (lambda.minCoeff() < -1e-12)
    throw Error(ErrorCode::InvalidArgument, "diffusion must be positive semidefinite");
  lambda = lambda.cwiseMax(0.0);

  LevyMarket m;
  m.drift_ = std::move(drift);
  m.diffusion_ = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
  if (d == 1) m.diffusion_(0, 0) = std::max(sym(0, 0), 0.0);
  m.volatility_ = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  if (d == 1) m.volatility_(0, 0) = std::sqrt(m.diffusion_(0, 0));
  m.horizon_ = horizon;

  for (const auto& atom : jumps.atoms) {
    if (atom.size.size() != d)
      throw Error(ErrorCode::InvalidArgument, "jump atom size must have market dimension");
    if (!(atom.intensity > 0.0) || !std::isfinite(atom.intensity))
      throw Error(ErrorCode::InvalidArgument, "jump intensities must be positive and finite");
    if (!atom.size.allFinite()) throw Error(ErrorCode::InvalidArgument, "jump sizes must be finite");
  }
  if (jumps.density) {
    const auto& dens = *jumps.density;
    if (d != 1) throw Error(ErrorCode::InvalidArgument, "jump densities are supported in dimension one only");
    if (!dens.density) throw Error(ErrorCode::InvalidArgument, "jump density function missing");
    if (dens.nodes < 16) throw Error(ErrorCode::InvalidArgument, "density quadrature needs >= 16 nodes");
    if (!(dens.lo < dens.hi)) throw Error(ErrorCode::InvalidArgument, "density support must satisfy lo < hi");
  }
  m.jumps_ = std::move(jumps);

  m.effective_atoms_.reserve(m.jumps_.atoms.size());
  for (const auto& atom : m.jumps_.atoms)
    if (atom.size.squaredNorm() > 0.0) m.effective_atoms_.push_back(atom);
  if (m.jumps_.density && m.jumps_.density->bounded()) {
    auto quad = quadrature_atoms(*m.jumps_.density);
    m.effective_atoms_.insert(m.effective_atoms_.end(), quad.begin(), quad.end());
  }

  m.compensator_ = Vector::Zero(d);
  for (const auto& atom : m.effective_atoms_) {
    m.total_intensity_ += atom.intensity;
    m.compensator_ += atom.intensity * cutoff(atom.size);
  }
  if (!std::isfinite(m.total_intensity_))
    throw Error(ErrorCode::InvalidArgument, "total jump intensity must be finite");
  return m;
}

LevyMarket LevyMarket::merton(double drift, double variance, double horizon) {
  return create(Vector::Constant(1, drift), Matrix::Constant(1, 1, variance), {}, horizon);
}

bool LevyMarket::has_unbounded_density() const {
  return jumps_.density.has_value() && !jumps_.density->bounded();
}

LevyMarket LevyMarket::with_horizon(double horizon) const {
  if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon T must be positive");
  LevyMarket m = *this;
  m.horizon_ = horizon;
  return m;
}

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

const ValidationCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

ValidationReport validate_market(const LevyMarket& market, const Preferences& prefs) {
  ValidationReport report;
  const int d = market.dim();
  const auto& dens = market.jumps().density;

  {
    ValidationCheck c{"s_positivity", true, "all jumps > -1"};
    for (const auto& atom : market.jumps().atoms) {
      if (atom.size.minCoeff() <= -1.0) {
        c.passed = false;
        std::ostringstream os;
        os << "jump atom with component " << atom.size.minCoeff() << " <= -1";
        c.detail = os.str();
      }
    }
    if (dens && dens->lo < -1.0) {
      c.passed = false;
      c.detail = "jump density supported below -1";
    }
    report.checks.push_back(c);
  }

  {
    ValidationCheck c{"finite_activity", true, ""};
    double intensity = 0.0;
    for (const auto& atom : market.jumps().atoms) intensity += atom.intensity;
    if (dens) {
      if (dens->bounded()) {
        intensity = market.total_intensity();
      } else {
        // inner part |x| <= 1 over a bounded range, outer part by tail extrapolation
        const double in_lo = std::max(dens->lo, -1.0);
        const double in_hi = std::min(dens->hi, 1.0);
        if (in_hi > in_lo) intensity += qags(dens->density, in_lo, in_hi);
        const TailEstimate outer = density_outer_integral(*dens, [](double) { return 1.0; });
        if (!outer.finite) intensity = kInf;
        else intensity += outer.value;
      }
    }
    c.passed = std::isfinite(intensity);
    std::ostringstream os;
    os << "total intensity " << intensity;
    c.detail = os.str();
    report.checks.push_back(c);
  }

  if (prefs.p() > 0.0) {
    const double p = prefs.p();
    ValidationCheck c{"p_moment", true, ""};
    double moment = 0.0;
    for (const auto& atom : market.jumps().atoms) {
      const double n = atom.size.norm();
      if (n > 1.0) moment += std::pow(n, p) * atom.intensity;
    }
    if (dens) {
      const TailEstimate outer =
          density_outer_integral(*dens, [p](double x) { return std::pow(std::abs(x), p); });
      if (!outer.finite) moment = kInf;
      else moment += outer.value;
    }
    c.passed = std::isfinite(moment);
    std::ostringstream os;
    os << "int |x|^p 1{|x|>1} F(dx) = " << moment;
    c.detail = os.str();
    report.checks.push_back(c);
  }

  {
    ValidationCheck c{"non_monotone", true, "every asset has upside and downside"};
    for (int i = 0; i < d; ++i) {
      const double net_drift = market.drift()[i] - market.compensator()[i];
      const bool diffusive = market.diffusion()(i, i) > 0.0;
      bool up_jump = false;
      bool down_jump = false;
      for (const auto& atom : market.jumps().atoms) {
        up_jump = up_jump || atom.size[i] > 0.0;
        down_jump = down_jump || atom.size[i] < 0.0;
      }
      if (dens) {
        up_jump = up_jump || dens->hi > 0.0;
        down_jump = down_jump || dens->lo < 0.0;
      }
      if (diffusive) continue;
      // R^i == 0 is a constant price, not an arbitrage
      if (!up_jump && !down_jump && net_drift == 0.0) continue;
      const bool increasing = !down_jump && net_drift >= 0.0;
      const bool decreasing = !up_jump && net_drift <= 0.0;
      if (increasing || decreasing) {
        c.passed = false;
        std::ostringstream os;
        os << "asset " << i << " return process is " << (increasing ? "increasing" : "decreasing");
        c.detail = os.str();
      }
    }
    report.checks.push_back(c);
  }
  return report;
}

}  // namespace opproc
