#include "opproc/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "opproc/errors.hpp"

namespace opproc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kUnboundedCap = 1e8;
constexpr double kBracketWidth = 1e-10;
constexpr double kGradTol = 1e-10;
constexpr double kBoundaryMargin = 1e-14;

struct Interval {
  double lo = -kInf;
  double hi = kInf;
};

Interval domain_interval(const ConstraintSet& s) {
  Interval iv{s.lower[0], s.upper[0]};
  for (const auto& h : s.halfspaces) {
    const double a = h.normal[0];
    if (a > 0.0) iv.hi = std::min(iv.hi, h.offset / a);
    else if (a < 0.0) iv.lo = std::max(iv.lo, h.offset / a);
  }
  return iv;
}

// Region where every atom has 1 + y x >= 0.
Interval atom_interval(const GFunction& f) {
  Interval iv;
  for (const auto& atom : f.market.effective_atoms()) {
    const double x = atom.size[0];
    if (x > 0.0) iv.lo = std::max(iv.lo, -1.0 / x);
    else if (x < 0.0) iv.hi = std::min(iv.hi, -1.0 / x);
  }
  return iv;
}

// (1 + u)^p / p - 1/p, accurate for small u
double power_term(double u, double p) { return std::expm1(p * std::log1p(u)) / p; }

double d1(const GFunction& f, double y) {
  const double p = f.p;
  double g = f.market.drift()[0] + (p - 1.0) * f.market.diffusion()(0, 0) * y;
  for (const auto& atom : f.market.effective_atoms()) {
    const double x = atom.size[0];
    const double u = 1.0 + y * x;
    if (!(u > kBoundaryMargin)) throw Error(ErrorCode::DomainBoundary, "1 + y x vanishes at an atom");
    g += atom.intensity * (std::pow(u, p - 1.0) * x - cutoff(x));
  }
  return g;
}

double d2(const GFunction& f, double y) {
  const double p = f.p;
  double h = (p - 1.0) * f.market.diffusion()(0, 0);
  for (const auto& atom : f.market.effective_atoms()) {
    const double x = atom.size[0];
    const double u = 1.0 + y * x;
    if (!(u > kBoundaryMargin)) throw Error(ErrorCode::DomainBoundary, "1 + y x vanishes at an atom");
    h += (p - 1.0) * atom.intensity * std::pow(u, p - 2.0) * x * x;
  }
  return h;
}

bool strictly_inside_atoms(const GFunction& f, const Vector& y) {
  for (const auto& atom : f.market.effective_atoms())
    if (!(1.0 + y.dot(atom.size) > kBoundaryMargin)) return false;
  return true;
}

MaximizerResult make_result(const GFunction& f, double y, MaxStatus status, double residual, int iters) {
  MaximizerResult r;
  r.argmax = Vector::Constant(1, y);
  r.value = g_eval(f, y);
  r.status = status;
  r.first_order_residual = residual;
  r.iterations = iters;
  return r;
}

MaximizerResult max_1d(const GFunction& f) {
  const Interval user = domain_interval(f.domain);
  const Interval atoms = atom_interval(f);
  const double lo = std::max(user.lo, atoms.lo);
  const double hi = std::min(user.hi, atoms.hi);
  if (lo == hi) return make_result(f, lo, MaxStatus::Boundary, 0.0, 0);

  const double b = f.market.drift()[0];
  if (f.market.diffusion()(0, 0) == 0.0 && f.market.effective_atoms().empty()) {
    // g(y) = b y: flat at b = 0 (smallest-norm point), else the far end in the direction of b
    if (b == 0.0) return make_result(f, 0.0, MaxStatus::Interior, 0.0, 0);
    const double end = b > 0.0 ? hi : lo;
    if (std::isfinite(end)) return make_result(f, end, MaxStatus::Boundary, 0.0, 0);
    return make_result(f, std::copysign(kUnboundedCap, b), MaxStatus::UnboundedAbove, std::abs(b), 0);
  }

  const double g0 = d1(f, 0.0);
  if (g0 == 0.0) return make_result(f, 0.0, MaxStatus::Interior, 0.0, 0);
  const double s = g0 > 0.0 ? 1.0 : -1.0;
  const double end = s > 0.0 ? hi : lo;
  const double atom_end = s > 0.0 ? atoms.hi : atoms.lo;
  int iters = 0;

  double inner = 0.0;  // s * g' > 0 here
  double outer = 0.0;  // s * g' < 0 here
  if (std::isfinite(end) && end != atom_end) {
    const double ge = d1(f, end);
    if (s * ge >= 0.0) return make_result(f, end, MaxStatus::Boundary, 0.0, 0);
    outer = end;
  } else if (std::isfinite(end)) {
    // g' diverges to -s * inf at an atom boundary; approach it geometrically
    bool found = false;
    for (int k = 1; k < 1100 && !found; ++k, ++iters) {
      const double y = inner + (end - inner) * 0.5;
      if (y == inner || y == end) break;
      double gy;
      try {
        gy = d1(f, y);
      } catch (const Error&) {
        outer = y;
        found = true;
        break;
      }
      if (s * gy < 0.0) {
        outer = y;
        found = true;
      } else {
        inner = y;
      }
    }
    if (!found) return make_result(f, inner, MaxStatus::Boundary, 0.0, iters);
  } else {
    double step = 1.0;
    for (;; step *= 2.0, ++iters) {
      const double y = s * step;
      if (step > kUnboundedCap) {
        return make_result(f, s * kUnboundedCap, MaxStatus::UnboundedAbove,
                           std::abs(d1(f, s * kUnboundedCap)), iters);
      }
      if (s * d1(f, y) < 0.0) {
        outer = y;
        break;
      }
      inner = y;
    }
  }

  double a = std::min(inner, outer);
  double c = std::max(inner, outer);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = c - invphi * (c - a);
  double x2 = a + invphi * (c - a);
  double f1 = g_eval(f, x1);
  double f2 = g_eval(f, x2);
  while (c - a > std::max(kBracketWidth, 4.0 * std::numeric_limits<double>::epsilon() * std::abs(a + c))) {
    ++iters;
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (c - a);
      f2 = g_eval(f, x2);
    } else {
      c = x2;
      x2 = x1;
      f2 = f1;
      x1 = c - invphi * (c - a);
      f1 = g_eval(f, x1);
    }
  }
  double y = 0.5 * (a + c);
  double gy = d1(f, y);
  const double bracket_lo = std::min(inner, outer);
  const double bracket_hi = std::max(inner, outer);
  for (int k = 0; k < 8 && gy != 0.0; ++k) {
    const double h = d2(f, y);
    if (!(h < 0.0)) break;
    const double yn = y - gy / h;
    if (!(yn >= bracket_lo && yn <= bracket_hi)) break;
    const double gn = d1(f, yn);
    if (!(std::abs(gn) < std::abs(gy))) break;
    y = yn;
    gy = gn;
    ++iters;
  }
  return make_result(f, y, MaxStatus::Interior, std::abs(gy), iters);
}

struct Linear {
  Vector a;
  double b;
  bool equality;
};

bool is_atom_halfspace(const GFunction& f, const Halfspace& h) {
  if (h.offset != 1.0) return false;
  for (const auto& atom : f.market.effective_atoms())
    if ((h.normal + atom.size).cwiseAbs().maxCoeff() == 0.0) return true;
  return false;
}

MaximizerResult max_nd(const GFunction& f) {
  const int n = f.market.dim();
  std::vector<Linear> cons;
  std::vector<int> active;
  for (int i = 0; i < n; ++i) {
    Vector e = Vector::Zero(n);
    e[i] = 1.0;
    if (f.domain.pinned(i)) {
      cons.push_back({e, f.domain.upper[i], true});
      active.push_back(static_cast<int>(cons.size()) - 1);
      continue;
    }
    if (std::isfinite(f.domain.upper[i])) cons.push_back({e, f.domain.upper[i], false});
    if (std::isfinite(f.domain.lower[i])) cons.push_back({-e, -f.domain.lower[i], false});
  }
  for (const auto& h : f.domain.halfspaces)
    if (!is_atom_halfspace(f, h)) cons.push_back({h.normal, h.offset, false});

  Vector y = Vector::Zero(n);
  MaximizerResult res;
  res.status = MaxStatus::Interior;
  double residual = kInf;
  int iter = 0;
  for (; iter < 500; ++iter) {
    const Vector gr = g_grad(f, y);
    const Matrix H = g_hess(f, y);
    Matrix Z;
    if (active.empty()) {
      Z = Matrix::Identity(n, n);
    } else {
      Matrix N(static_cast<Eigen::Index>(active.size()), n);
      for (std::size_t r = 0; r < active.size(); ++r) N.row(static_cast<Eigen::Index>(r)) = cons[active[r]].a.transpose();
      Eigen::FullPivLU<Matrix> lu(N);
      Z = lu.kernel();
      if (lu.rank() == n) Z = Matrix::Zero(n, 0);
    }
    const Vector r = Z.cols() > 0 ? Vector(Z.transpose() * gr) : Vector::Zero(0);
    residual = r.size() ? r.norm() : 0.0;

    if (residual <= kGradTol) {
      bool dropped = false;
      if (!active.empty()) {
        Matrix Nt(n, static_cast<Eigen::Index>(active.size()));
        for (std::size_t c = 0; c < active.size(); ++c) Nt.col(static_cast<Eigen::Index>(c)) = cons[active[c]].a;
        const Vector lambda = Nt.completeOrthogonalDecomposition().solve(gr);
        double worst = -1e-12;
        std::size_t worst_at = active.size();
        for (std::size_t c = 0; c < active.size(); ++c) {
          if (cons[active[c]].equality) continue;
          if (lambda[static_cast<Eigen::Index>(c)] < worst) {
            worst = lambda[static_cast<Eigen::Index>(c)];
            worst_at = c;
          }
        }
        if (worst_at < active.size()) {
          active.erase(active.begin() + static_cast<std::ptrdiff_t>(worst_at));
          dropped = true;
        }
      }
      if (!dropped) break;
      continue;
    }

    const Matrix Hr = -(Z.transpose() * H * Z);
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Hr);
    cod.setThreshold(1e-12);
    Vector dr = cod.solve(r);
    const Vector lin = r - Hr * dr;
    const bool linear = lin.norm() > 1e-10 * (1.0 + r.norm());
    Vector d = Z * (linear ? lin : dr);
    if (!(gr.dot(d) > 0.0)) d = Z * r;

    double alpha_max = kInf;
    int blocking = -1;
    for (std::size_t c = 0; c < cons.size(); ++c) {
      if (std::find(active.begin(), active.end(), static_cast<int>(c)) != active.end()) continue;
      const double ad = cons[c].a.dot(d);
      if (ad <= 0.0) continue;
      const double step = std::max(0.0, (cons[c].b - cons[c].a.dot(y)) / ad);
      if (step < alpha_max) {
        alpha_max = step;
        blocking = static_cast<int>(c);
      }
    }

    if (linear && !std::isfinite(alpha_max)) {
      // g grows without curvature along d: unbounded unless the atom domain stops it
      Vector far = y + d * (kUnboundedCap / std::max(d.norm(), 1e-300));
      if (strictly_inside_atoms(f, far)) {
        res.argmax = far;
        res.value = g_eval(f, far);
        res.status = MaxStatus::UnboundedAbove;
        res.first_order_residual = residual;
        res.iterations = iter;
        return res;
      }
      alpha_max = kUnboundedCap / std::max(d.norm(), 1e-300);
      blocking = -1;
    }

    const double g_now = g_eval(f, y);
    const double slope = gr.dot(d);
    double alpha = linear ? alpha_max : std::min(1.0, alpha_max);
    bool hit_block = std::isfinite(alpha_max) && alpha == alpha_max && blocking >= 0;
    bool accepted = false;
    for (int k = 0; k < 80; ++k) {
      const Vector trial = y + alpha * d;
      if (strictly_inside_atoms(f, trial)) {
        const double g_trial = g_eval(f, trial);
        if (std::isfinite(g_trial) && g_trial >= g_now + 1e-4 * alpha * slope) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
      hit_block = false;
    }
    if (!accepted) break;
    y += alpha * d;
    if (hit_block) {
      y -= cons[blocking].a * ((cons[blocking].a.dot(y) - cons[blocking].b) / cons[blocking].a.squaredNorm());
      active.push_back(blocking);
    }
    if (y.norm() > kUnboundedCap) {
      res.argmax = y;
      res.value = g_eval(f, y);
      res.status = MaxStatus::UnboundedAbove;
      res.first_order_residual = residual;
      res.iterations = iter;
      return res;
    }
  }

  res.argmax = y;
  res.value = g_eval(f, y);
  res.first_order_residual = residual;
  res.iterations = iter;
  res.status = active.empty() ? MaxStatus::Interior : MaxStatus::Boundary;
  return res;
}

}  // namespace

const char* to_string(MaxStatus status) {
  switch (status) {
    case MaxStatus::Interior: return "Interior";
    case MaxStatus::Boundary: return "Boundary";
    case MaxStatus::UnboundedAbove: return "UnboundedAbove";
  }
  return "Unknown";
}

GFunction GFunction::make(const LevyMarket& market, const Preferences& prefs,
                          const std::optional<ConstraintSet>& user) {
  if (market.has_unbounded_density())
    throw Error(ErrorCode::InvalidArgument, "g needs a jump density with bounded support");
  return GFunction{market, prefs.p(), constraint_set(market, user)};
}

double g_eval(const GFunction& f, double y) {
  if (!f.domain.contains(Vector::Constant(1, y), 1e-12 * std::max(1.0, std::abs(y)))) return -kInf;
  const double p = f.p;
  double v = y * f.market.drift()[0] + 0.5 * (p - 1.0) * f.market.diffusion()(0, 0) * y * y;
  for (const auto& atom : f.market.effective_atoms()) {
    const double x = atom.size[0];
    const double yx = y * x;
    if (1.0 + yx < 0.0) return -kInf;
    if (1.0 + yx == 0.0) {
      if (p < 0.0) return -kInf;
      v += atom.intensity * (-1.0 / p - y * cutoff(x));
      continue;
    }
    v += atom.intensity * (power_term(yx, p) - y * cutoff(x));
  }
  return v;
}

double g_eval(const GFunction& f, const Vector& y) {
  if (y.size() != f.market.dim()) throw Error(ErrorCode::InvalidArgument, "g argument dimension mismatch");
  if (y.size() == 1) return g_eval(f, y[0]);
  if (!f.domain.contains(y, 1e-12 * std::max(1.0, y.norm()))) return -kInf;
  const double p = f.p;
  double v = y.dot(f.market.drift()) + 0.5 * (p - 1.0) * y.dot(f.market.diffusion() * y);
  for (const auto& atom : f.market.effective_atoms()) {
    const double yx = y.dot(atom.size);
    if (1.0 + yx < 0.0) return -kInf;
    if (1.0 + yx == 0.0) {
      if (p < 0.0) return -kInf;
      v += atom.intensity * (-1.0 / p - y.dot(cutoff(atom.size)));
      continue;
    }
    v += atom.intensity * (power_term(yx, p) - y.dot(cutoff(atom.size)));
  }
  return v;
}

Vector g_grad(const GFunction& f, const Vector& y) {
  const double p = f.p;
  Vector g = f.market.drift() + (p - 1.0) * (f.market.diffusion() * y);
  for (const auto& atom : f.market.effective_atoms()) {
    const double u = 1.0 + y.dot(atom.size);
    if (!(u > kBoundaryMargin)) throw Error(ErrorCode::DomainBoundary, "1 + y^T x vanishes at an atom");
    g += atom.intensity * (std::pow(u, p - 1.0) * atom.size - cutoff(atom.size));
  }
  return g;
}

Matrix g_hess(const GFunction& f, const Vector& y) {
  const double p = f.p;
  Matrix h = (p - 1.0) * f.market.diffusion();
  for (const auto& atom : f.market.effective_atoms()) {
    const double u = 1.0 + y.dot(atom.size);
    if (!(u > kBoundaryMargin)) throw Error(ErrorCode::DomainBoundary, "1 + y^T x vanishes at an atom");
    h += (p - 1.0) * atom.intensity * std::pow(u, p - 2.0) * (atom.size * atom.size.transpose());
  }
  return h;
}

MaximizerResult g_max(const GFunction& f) {
  return f.market.dim() == 1 ? max_1d(f) : max_nd(f);
}

GridScanResult g_grid_scan(const GFunction& f, double lo, double hi, std::size_t n, Execution exec) {
  if (f.market.dim() != 1) throw Error(ErrorCode::InvalidArgument, "grid scan is one-dimensional");
  if (n < 2 || !(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw Error(ErrorCode::InvalidArgument, "grid scan needs a bounded interval and n >= 2");
  constexpr std::size_t kChunk = 4096;
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<GridScanResult> best(n_chunks, {lo, -kInf});
  const double h = (hi - lo) / static_cast<double>(n - 1);
  auto scan_chunk = [&](std::size_t c) {
    GridScanResult b{lo, -kInf};
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const double y = i + 1 == n ? hi : lo + static_cast<double>(i) * h;
      const double v = g_eval(f, y);
      if (v > b.value) b = {y, v};
    }
    best[c] = b;
  };
  const auto nc = static_cast<std::ptrdiff_t>(n_chunks);
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < nc; ++c) scan_chunk(static_cast<std::size_t>(c));
  } else {
    for (std::ptrdiff_t c = 0; c < nc; ++c) scan_chunk(static_cast<std::size_t>(c));
  }
  GridScanResult out{lo, -kInf};
  for (const auto& b : best)
    if (b.value > out.value) out = b;
  return out;
}

}  // namespace opproc
