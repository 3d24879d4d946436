#include "opproc/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "opproc/errors.hpp"
#include "opproc/rng.hpp"

namespace opproc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Per-path kernels write into disjoint rows; reductions run afterwards in index order, so the
// serial and parallel executions produce identical numbers.
template <class MakeWorkspace, class Body>
void for_paths(std::size_t n, Execution exec, MakeWorkspace make_ws, Body body) {
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (exec == Execution::Parallel) {
#pragma omp parallel
    {
      auto ws = make_ws();
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i), ws);
    }
  } else {
    auto ws = make_ws();
    for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i), ws);
  }
}

struct Workspace {
  std::vector<double> inc, x, xhat;
};

std::vector<double> discount_on_grid(const Preferences& prefs, const TimeGrid& grid) {
  std::vector<double> d(grid.n_points());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = prefs.discount()(grid.time(static_cast<int>(k)));
  return d;
}

void check_curve(const OpportunityCurve& curve, const TimeGrid& grid) {
  if (curve.grid.n_steps != grid.n_steps || std::abs(curve.grid.horizon - grid.horizon) > 1e-12)
    throw Error(ErrorCode::InvalidArgument, "curve grid differs from the simulation grid");
}

void check_strategy(const Strategy& s, const PathSource& paths) {
  if (s.pi.size() != paths.dim()) throw Error(ErrorCode::InvalidArgument, "strategy dimension mismatch");
  if (s.kappa.size() != paths.grid().n_points())
    throw Error(ErrorCode::InvalidArgument, "kappa must have one value per grid point");
}

MartingaleTestReport reduce_checkpoints(const std::vector<double>& values, const std::vector<std::uint8_t>& rejected,
                                        std::size_t m, const std::vector<double>& times) {
  const std::size_t n = rejected.size();
  MartingaleTestReport r;
  r.checkpoints = times;
  r.n_paths = n;
  r.n_rejected = static_cast<std::size_t>(std::count(rejected.begin(), rejected.end(), 1));
  if (r.n_rejected == n) throw Error(ErrorCode::AllPathsRejected, "no retained paths to estimate from");
  std::vector<RunningStats> level(m), step(m ? m - 1 : 0);
  RunningStats total;
  for (std::size_t i = 0; i < n; ++i) {
    if (rejected[i]) continue;
    const double* v = values.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) level[j].add(v[j]);
    for (std::size_t j = 0; j + 1 < m; ++j) step[j].add(v[j + 1] - v[j]);
    total.add(v[m - 1] - v[0]);
  }
  for (std::size_t j = 0; j < m; ++j) {
    r.means.push_back(level[j].mean());
    r.standard_errors.push_back(level[j].se());
  }
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const double d = step[j].mean();
    const double se = step[j].se();
    const double slack = 1e-12 * std::max(1.0, std::abs(r.means[j]));
    r.step_means.push_back(d);
    r.step_se.push_back(se);
    if (std::abs(d) <= 3.0 * se + slack) r.verdicts.push_back(Verdict::ConsistentMartingale);
    else if (d <= 3.0 * se) r.verdicts.push_back(Verdict::ConsistentSupermartingale);
    else r.verdicts.push_back(Verdict::Violation);
  }
  r.total_change = total.mean();
  r.total_se = total.se();
  return r;
}

std::vector<double> checkpoint_times(const TimeGrid& grid, const std::vector<int>& cps) {
  std::vector<double> t;
  for (int k : cps) t.push_back(grid.time(k));
  return t;
}

// I at the checkpoints along one wealth path
void primal_values(std::span<const double> x, const Strategy& s, const OpportunityCurve& curve,
                   const std::vector<double>& d, double p, double dt, bool consumes, const std::vector<int>& cps,
                   double* out) {
  double running = 0.0;
  std::size_t j = 0;
  const std::size_t last = x.size() - 1;
  for (std::size_t k = 0; k <= last && j < cps.size(); ++k) {
    if (static_cast<int>(k) == cps[j]) out[j++] = curve.L[k] * std::pow(x[k], p) / p + running;
    if (k < last && consumes) running += d[k] * std::pow(s.kappa[k] * x[k], p) / p * dt;
  }
}

// Z at the checkpoints
void dual_values(std::span<const double> x, std::span<const double> c, std::span<const double> y, double dt,
                 bool consumes, const std::vector<int>& cps, double* out) {
  double running = 0.0;
  std::size_t j = 0;
  const std::size_t last = x.size() - 1;
  for (std::size_t k = 0; k <= last && j < cps.size(); ++k) {
    if (static_cast<int>(k) == cps[j]) out[j++] = x[k] * y[k] + running;
    if (k < last && consumes) running += c[k] * y[k] * dt;
  }
}

double dual_integral(std::span<const double> y, const std::vector<double>& d_beta, double q, double dt,
                     bool consumes) {
  const std::size_t last = y.size() - 1;
  auto ustar = [&](std::size_t k) { return -std::pow(y[k], q) * d_beta[k] / q; };
  double total = ustar(last);
  if (consumes) {
    double prev = ustar(0);
    for (std::size_t k = 1; k <= last; ++k) {
      const double cur = k == last ? total : ustar(k);
      total += 0.5 * (prev + cur) * dt;
      prev = cur;
    }
  }
  return total;
}

}  // namespace

double RunningStats::variance() const {
  if (n < 2.0) return 0.0;
  const double m = sum / n;
  return std::max(0.0, (sumsq - n * m * m) / (n - 1.0));
}

double RunningStats::se() const { return n > 0.0 ? std::sqrt(variance() / n) : 0.0; }

PathSource PathSource::stream(const LevyMarket& market, const TimeGrid& grid, std::size_t n_paths,
                              std::uint64_t seed) {
  PathSource s(grid, n_paths, market.dim());
  s.sampler_.emplace(market, grid, seed);
  return s;
}

PathSource PathSource::from_bundle(const PathBundle& bundle) {
  if (bundle.returns.empty()) throw Error(ErrorCode::InvalidArgument, "bundle has no returns");
  PathSource s(bundle.grid, bundle.n_paths, bundle.dim);
  s.bundle_ = &bundle;
  return s;
}

std::span<const double> PathSource::increments(std::size_t path, std::span<double> scratch) const {
  if (bundle_) return bundle_->path_returns(path);
  sampler_->increments(path, scratch);
  return scratch;
}

Strategy optimal_strategy(const Vector& pi_hat, const OpportunityCurve& curve) {
  Strategy s{pi_hat, curve.kappa};
  s.kappa.back() = 1.0;
  return s;
}

std::vector<int> checkpoint_indices(const TimeGrid& grid, int n) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "need at least one checkpoint interval");
  std::vector<int> out;
  for (int j = 0; j <= n; ++j) {
    const int k = static_cast<int>(std::lround(static_cast<double>(j) * grid.n_steps / n));
    if (out.empty() || out.back() != k) out.push_back(k);
  }
  return out;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::ConsistentMartingale: return "ConsistentMartingale";
    case Verdict::ConsistentSupermartingale: return "ConsistentSupermartingale";
    case Verdict::Violation: return "Violation";
  }
  return "?";
}

bool MartingaleTestReport::martingale() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](Verdict v) { return v == Verdict::ConsistentMartingale; });
}

bool MartingaleTestReport::supermartingale() const {
  return std::none_of(verdicts.begin(), verdicts.end(), [](Verdict v) { return v == Verdict::Violation; });
}

bool MartingaleTestReport::strict_decrease() const { return total_change < -3.0 * total_se; }

MartingaleTestReport primal_martingale_test(const Preferences& prefs, const Strategy& strategy,
                                            const OpportunityCurve& curve, const PathSource& paths, double x0,
                                            const PrimalTestOptions& options) {
  if (!(x0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "initial capital x0 must be positive");
  const TimeGrid& grid = paths.grid();
  check_curve(curve, grid);
  check_strategy(strategy, paths);
  if (options.control) check_strategy(*options.control, paths);
  const auto cps = checkpoint_indices(grid, options.n_checkpoints);
  const std::size_t m = cps.size();
  const std::size_t n = paths.n_paths();
  const auto d = discount_on_grid(prefs, grid);
  const double p = prefs.p();
  const double dt = grid.dt();
  const bool consumes = prefs.consumes();
  const double i0 = curve.L[0] * std::pow(x0, p) / p;

  std::vector<double> values(n * m);
  std::vector<std::uint8_t> rejected(n, 0);
  const std::size_t np = grid.n_points();
  for_paths(
      n, options.exec,
      [&] { return Workspace{std::vector<double>(paths.width()), std::vector<double>(np), std::vector<double>(np)}; },
      [&](std::size_t i, Workspace& ws) {
        auto inc = paths.increments(i, ws.inc);
        double* out = values.data() + i * m;
        bool ok = wealth_along(inc, strategy, dt, x0, consumes, ws.x);
        if (ok && options.control) ok = wealth_along(inc, *options.control, dt, x0, consumes, ws.xhat);
        if (!ok) {
          rejected[i] = 1;
          std::fill(out, out + m, kNaN);
          return;
        }
        primal_values(ws.x, strategy, curve, d, p, dt, consumes, cps, out);
        if (options.control) {
          std::vector<double> ctrl(m);
          primal_values(ws.xhat, *options.control, curve, d, p, dt, consumes, cps, ctrl.data());
          for (std::size_t j = 0; j < m; ++j) out[j] = out[j] - ctrl[j] + i0;
        }
      });
  return reduce_checkpoints(values, rejected, m, checkpoint_times(grid, cps));
}

MartingaleTestReport dual_supermartingale_test(const PathBundle& wealth, const DualState& dual,
                                               const Preferences& prefs, int n_checkpoints) {
  if (wealth.wealth.empty()) throw Error(ErrorCode::InvalidArgument, "bundle has no wealth paths");
  if (dual.Y.n_paths != wealth.n_paths || dual.Y.grid.n_steps != wealth.grid.n_steps)
    throw Error(ErrorCode::InvalidArgument, "dual paths do not match the bundle");
  const auto cps = checkpoint_indices(wealth.grid, n_checkpoints);
  const std::size_t m = cps.size();
  std::vector<double> values(wealth.n_paths * m);
  std::vector<std::uint8_t> rejected(wealth.n_paths, 0);
  for (std::size_t i = 0; i < wealth.n_paths; ++i) {
    double* out = values.data() + i * m;
    if (wealth.rejected[i] || dual.Y.rejected[i]) {
      rejected[i] = 1;
      std::fill(out, out + m, kNaN);
      continue;
    }
    dual_values(wealth.path_wealth(i), wealth.path_consumption(i), dual.Y.path(i), wealth.grid.dt(),
                prefs.consumes(), cps, out);
  }
  return reduce_checkpoints(values, rejected, m, checkpoint_times(wealth.grid, cps));
}

MartingaleTestReport dual_supermartingale_test(const Preferences& prefs, const Strategy& strategy,
                                               const Strategy& optimal, const OpportunityCurve& curve,
                                               const PathSource& paths, double x0, int n_checkpoints,
                                               Execution exec) {
  if (!(x0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "initial capital x0 must be positive");
  const TimeGrid& grid = paths.grid();
  check_curve(curve, grid);
  check_strategy(strategy, paths);
  check_strategy(optimal, paths);
  const auto cps = checkpoint_indices(grid, n_checkpoints);
  const std::size_t m = cps.size();
  const std::size_t n = paths.n_paths();
  const std::size_t np = grid.n_points();
  const double p = prefs.p();
  const double dt = grid.dt();
  const bool consumes = prefs.consumes();
  std::vector<double> values(n * m);
  std::vector<std::uint8_t> rejected(n, 0);
  struct Ws {
    std::vector<double> inc, x, xhat, c, y;
  };
  for_paths(
      n, exec,
      [&] {
        return Ws{std::vector<double>(paths.width()), std::vector<double>(np), std::vector<double>(np),
                  std::vector<double>(np), std::vector<double>(np)};
      },
      [&](std::size_t i, Ws& ws) {
        auto inc = paths.increments(i, ws.inc);
        double* out = values.data() + i * m;
        const bool ok = wealth_along(inc, strategy, dt, x0, consumes, ws.x) &&
                        wealth_along(inc, optimal, dt, x0, consumes, ws.xhat);
        if (!ok) {
          rejected[i] = 1;
          std::fill(out, out + m, kNaN);
          return;
        }
        for (std::size_t k = 0; k < np; ++k) {
          ws.y[k] = curve.L[k] * std::pow(ws.xhat[k], p - 1.0);
          ws.c[k] = consumes ? strategy.kappa[k] * ws.x[k] : 0.0;
        }
        dual_values(ws.x, ws.c, ws.y, dt, consumes, cps, out);
      });
  return reduce_checkpoints(values, rejected, m, checkpoint_times(grid, cps));
}

ProcessPaths optimal_dual_paths(const Preferences& prefs, const Strategy& optimal, const OpportunityCurve& curve,
                                const PathSource& paths, double x0, Execution exec) {
  const TimeGrid& grid = paths.grid();
  check_curve(curve, grid);
  check_strategy(optimal, paths);
  ProcessPaths out(grid, paths.n_paths());
  const double p = prefs.p();
  const bool consumes = prefs.consumes();
  for_paths(
      paths.n_paths(), exec, [&] { return std::vector<double>(paths.width()); },
      [&](std::size_t i, std::vector<double>& scratch) {
        auto y = out.path(i);
        if (!wealth_along(paths.increments(i, scratch), optimal, grid.dt(), x0, consumes, y)) {
          out.rejected[i] = 1;
          std::fill(y.begin(), y.end(), kNaN);
          return;
        }
        for (std::size_t k = 0; k < y.size(); ++k) y[k] = curve.L[k] * std::pow(y[k], p - 1.0);
      });
  if (out.n_rejected() == out.n_paths && out.n_paths > 0)
    throw Error(ErrorCode::AllPathsRejected, "every path hit a nonpositive wealth multiplier");
  return out;
}

namespace {

DualValueReport dual_value_from(const ProcessPaths& Y, const Preferences& prefs, double exact, Execution exec) {
  const auto dbeta = [&] {
    auto d = discount_on_grid(prefs, Y.grid);
    for (double& v : d) v = std::pow(v, prefs.beta());
    return d;
  }();
  std::vector<double> per_path(Y.n_paths, kNaN);
  for_paths(
      Y.n_paths, exec, [] { return 0; },
      [&](std::size_t i, int&) {
        if (!Y.rejected[i]) per_path[i] = dual_integral(Y.path(i), dbeta, prefs.q(), Y.grid.dt(), prefs.consumes());
      });
  RunningStats s;
  for (std::size_t i = 0; i < Y.n_paths; ++i)
    if (!Y.rejected[i]) s.add(per_path[i]);
  DualValueReport r;
  r.estimate = s.mean();
  r.se = s.se();
  r.exact = exact;
  r.holds = std::abs(r.estimate - r.exact) <= 3.0 * r.se + 1e-12 * std::abs(r.exact);
  return r;
}

}  // namespace

DualValueReport dual_value_mc(const Preferences& prefs, const Strategy& optimal, const OpportunityCurve& curve,
                              const PathSource& paths, double x0, Execution exec) {
  const TimeGrid& grid = paths.grid();
  check_curve(curve, grid);
  check_strategy(optimal, paths);
  const double p = prefs.p();
  const double q = prefs.q();
  const bool consumes = prefs.consumes();
  const std::size_t np = grid.n_points();
  auto dbeta = discount_on_grid(prefs, grid);
  for (double& v : dbeta) v = std::pow(v, prefs.beta());
  std::vector<double> per_path(paths.n_paths(), kNaN);
  std::vector<std::uint8_t> rejected(paths.n_paths(), 0);
  for_paths(
      paths.n_paths(), exec,
      [&] { return Workspace{std::vector<double>(paths.width()), std::vector<double>(np), {}}; },
      [&](std::size_t i, Workspace& ws) {
        if (!wealth_along(paths.increments(i, ws.inc), optimal, grid.dt(), x0, consumes, ws.x)) {
          rejected[i] = 1;
          return;
        }
        for (std::size_t k = 0; k < np; ++k) ws.x[k] = curve.L[k] * std::pow(ws.x[k], p - 1.0);
        per_path[i] = dual_integral(ws.x, dbeta, q, grid.dt(), consumes);
      });
  RunningStats s;
  for (std::size_t i = 0; i < per_path.size(); ++i)
    if (!rejected[i]) s.add(per_path[i]);
  if (s.n == 0.0) throw Error(ErrorCode::AllPathsRejected, "every path hit a nonpositive wealth multiplier");
  const double y0 = curve.L[0] * std::pow(x0, p - 1.0);
  DualValueReport r;
  r.estimate = s.mean();
  r.se = s.se();
  r.exact = -std::pow(y0, q) * curve.Lstar[0] / q;
  r.holds = std::abs(r.estimate - r.exact) <= 3.0 * r.se + 1e-12 * std::abs(r.exact);
  return r;
}

DualValueReport dual_value_mc(const DualState& dual, const Preferences& prefs) {
  return dual_value_from(dual.Y, prefs, dual.dual_value, Execution::Parallel);
}

RhqReport rhq_estimate(const ProcessPaths& Y, double q, const Preferences& prefs, const std::vector<int>& tau_indices,
                       std::optional<double> constant, Execution exec) {
  if (q == 0.0 || q >= 1.0 || !std::isfinite(q)) throw Error(ErrorCode::InvalidArgument, "q must lie in (-inf,0) or (0,1)");
  const std::size_t np = Y.grid.n_points();
  const std::size_t m = tau_indices.size();
  for (int k : tau_indices)
    if (k < 0 || static_cast<std::size_t>(k) >= np) throw Error(ErrorCode::InvalidArgument, "tau index out of range");
  const double dt = Y.grid.dt();
  const bool consumes = prefs.consumes();
  std::vector<double> values(Y.n_paths * m, kNaN);
  for_paths(
      Y.n_paths, exec, [&] { return std::vector<double>(np); },
      [&](std::size_t i, std::vector<double>& tail) {
        if (Y.rejected[i]) return;
        auto y = Y.path(i);
        std::vector<double> yq(np);
        for (std::size_t k = 0; k < np; ++k) yq[k] = std::pow(y[k], q);
        // tail[k] = trapezoid of yq over [t_k, T]
        tail[np - 1] = 0.0;
        for (std::size_t k = np - 1; k > 0; --k) tail[k - 1] = tail[k] + 0.5 * (yq[k - 1] + yq[k]) * dt;
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t k = static_cast<std::size_t>(tau_indices[j]);
          values[i * m + j] = ((consumes ? tail[k] : 0.0) + yq[np - 1]) / yq[k];
        }
      });
  std::vector<RunningStats> stats(m);
  for (std::size_t i = 0; i < Y.n_paths; ++i) {
    if (Y.rejected[i]) continue;
    for (std::size_t j = 0; j < m; ++j) stats[j].add(values[i * m + j]);
  }
  RhqReport r;
  r.q = q;
  r.constant = constant;
  for (std::size_t j = 0; j < m; ++j) {
    r.tau_grid.push_back(Y.grid.time(tau_indices[j]));
    r.estimates.push_back(stats[j].mean());
    r.standard_errors.push_back(stats[j].se());
  }
  if (m) {
    r.implied_Cq = q < 0.0 ? *std::max_element(r.estimates.begin(), r.estimates.end())
                           : *std::min_element(r.estimates.begin(), r.estimates.end());
  }
  if (constant) {
    for (std::size_t j = 0; j < m; ++j) {
      const double band = 3.0 * r.standard_errors[j] + 1e-12 * std::abs(*constant);
      if (q < 0.0 ? r.estimates[j] > *constant + band : r.estimates[j] < *constant - band) r.holds = false;
    }
  }
  return r;
}

double rhq_constant_transfer(double Cq, double q, double q1, double mu_total) {
  if (!(Cq > 0.0) || !(mu_total >= 1.0)) throw Error(ErrorCode::InvalidArgument, "need Cq > 0 and mu_total >= 1");
  auto admissible = [](double v) { return std::isfinite(v) && v != 0.0 && v < 1.0; };
  if (!admissible(q) || !admissible(q1)) throw Error(ErrorCode::RegimeMismatch, "exponents must lie in (-inf,0) or (0,1)");
  if (q == q1) return Cq;
  if ((q < q1 && q1 < 0.0) || (0.0 < q && q < q1)) return std::pow(mu_total, 1.0 - q1 / q) * std::pow(Cq, q1 / q);
  if (q < 0.0 && q1 > 0.0) return std::pow(Cq, q1 / q);
  if (0.0 < q1 && q1 < q)
    return std::pow(mu_total, (q1 - q) / (1.0 - q)) * std::pow(Cq, (1.0 - q1) / (1.0 - q));
  throw Error(ErrorCode::RegimeMismatch, "no transfer from q=" + std::to_string(q) + " to q1=" + std::to_string(q1));
}

PhiReport phi_curve(const ProcessPaths& Y, int t_index, int s_index, const std::vector<double>& q_grid) {
  const int last = Y.grid.n_steps;
  if (t_index < 0 || s_index <= t_index || s_index > last)
    throw Error(ErrorCode::InvalidArgument, "need 0 <= t < s <= T");
  for (double q : q_grid)
    if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::InvalidArgument, "phi grid must lie in (0,1)");
  std::vector<double> rho;
  for (std::size_t i = 0; i < Y.n_paths; ++i) {
    if (Y.rejected[i]) continue;
    auto y = Y.path(i);
    rho.push_back(y[s_index] / y[t_index]);
  }
  if (rho.empty()) throw Error(ErrorCode::AllPathsRejected, "no retained paths");
  PhiReport r;
  r.q_grid = q_grid;
  for (double q : q_grid) {
    RunningStats s;
    for (double v : rho) s.add(std::pow(v, q));
    const double phi = std::pow(s.mean(), 1.0 / (1.0 - q));
    r.phi.push_back(phi);
    r.se.push_back(phi * s.se() / ((1.0 - q) * s.mean()));
  }
  for (std::size_t j = 0; j + 1 < r.phi.size(); ++j) {
    const double band = 3.0 * std::hypot(r.se[j], r.se[j + 1]);
    if (r.phi[j] < r.phi[j + 1] - band) r.monotone = false;
  }
  RunningStats mean_rho, entropy;
  for (double v : rho) {
    mean_rho.add(v);
    entropy.add(v * std::log(v));
  }
  if (std::abs(mean_rho.mean() - 1.0) <= 3.0 * mean_rho.se() + 1e-12 && std::isfinite(entropy.mean())) {
    r.limit = std::exp(-entropy.mean());
    r.limit_se = *r.limit * entropy.se();
  }
  return r;
}

double phi_lognormal(double sigma2, double q) { return std::exp(-sigma2 * q / 2.0); }

ProcessPaths lognormal_paths(double sigma, const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                             Execution exec) {
  ProcessPaths out(grid, n_paths);
  const double sd = sigma * std::sqrt(grid.dt());
  const double drift = -0.5 * sigma * sigma * grid.dt();
  for_paths(
      n_paths, exec, [] { return 0; },
      [&](std::size_t i, int&) {
        SubstreamRng rng(seed, i);
        std::normal_distribution<double> normal;
        auto y = out.path(i);
        double logy = 0.0;
        y[0] = 1.0;
        for (std::size_t k = 1; k < y.size(); ++k) {
          logy += drift + sd * normal(rng);
          y[k] = std::exp(logy);
        }
      });
  return out;
}

double ThetaModel::operator()(double t) const {
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
  if (it == breakpoints.begin()) return values.front();
  return values[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
}

double ThetaModel::integral_sq(double a, double b) const {
  if (b <= a) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < breakpoints.size(); ++j) {
    const double lo = std::max(a, breakpoints[j]);
    const double hi = std::min(b, j + 1 < breakpoints.size() ? breakpoints[j + 1] : b);
    if (hi > lo) total += values[j] * values[j] * (hi - lo);
  }
  return total;
}

double ThetaModel::bound() const {
  double k = 0.0;
  for (double v : values) k = std::max(k, std::abs(v));
  return k;
}

ProcessPaths minimal_measure_density(const ThetaModel& theta, const TimeGrid& grid, std::size_t n_paths,
                                     std::uint64_t seed, Execution exec) {
  if (theta.breakpoints.empty() || theta.breakpoints.size() != theta.values.size() || theta.breakpoints.front() != 0.0)
    throw Error(ErrorCode::InvalidArgument, "theta needs matching breakpoints starting at 0");
  if (!std::isfinite(theta.bound())) throw Error(ErrorCode::InvalidArgument, "theta must be bounded");
  std::vector<double> var(static_cast<std::size_t>(grid.n_steps));
  for (int k = 0; k < grid.n_steps; ++k) var[k] = theta.integral_sq(grid.time(k), grid.time(k + 1));
  ProcessPaths out(grid, n_paths);
  for_paths(
      n_paths, exec, [] { return 0; },
      [&](std::size_t i, int&) {
        SubstreamRng rng(seed, i);
        std::normal_distribution<double> normal;
        auto z = out.path(i);
        double logz = 0.0;
        z[0] = 1.0;
        for (std::size_t k = 1; k < z.size(); ++k) {
          const double v = var[k - 1];
          logz += -std::sqrt(v) * normal(rng) - 0.5 * v;
          z[k] = std::exp(logz);
        }
      });
  return out;
}

double minimal_measure_rhq_constant(const ThetaModel& theta, double q, const Preferences& prefs) {
  const double T = prefs.horizon();
  const double k = q * (q - 1.0) / 2.0;
  std::vector<double> cuts(theta.breakpoints.begin(), theta.breakpoints.end());
  cuts.push_back(T);
  auto at = [&](double tau) {
    double acc = 0.0;
    double integral = 0.0;
    for (std::size_t j = 0; j < theta.breakpoints.size(); ++j) {
      const double lo = std::max(tau, cuts[j]);
      const double hi = std::min(T, cuts[j + 1]);
      if (hi <= lo) continue;
      const double w = theta.values[j] * theta.values[j];
      const double len = hi - lo;
      integral += std::exp(k * acc) * (k * w != 0.0 ? std::expm1(k * w * len) / (k * w) : len);
      acc += w * len;
    }
    return (prefs.consumes() ? integral : 0.0) + std::exp(k * acc);
  };
  std::vector<double> taus;
  const int n = 4000;
  for (int j = 0; j <= n; ++j) taus.push_back(T * j / n);
  for (double b : theta.breakpoints)
    if (b < T) taus.push_back(b);
  double best = at(taus.front());
  for (double tau : taus) best = q < 0.0 ? std::max(best, at(tau)) : std::min(best, at(tau));
  return best;
}

DichotomyReport rhq_dichotomy(const ProcessPaths& Y, const std::vector<double>& qs, const Preferences& prefs,
                              const std::vector<int>& tau_indices, Execution exec) {
  DichotomyReport r;
  for (double q : qs) {
    if (!(q > 0.0 && q < 1.0)) throw Error(ErrorCode::InvalidArgument, "dichotomy exponents must lie in (0,1)");
    r.estimates.push_back(rhq_estimate(Y, q, prefs, tau_indices, std::nullopt, exec));
  }
  const double mu_total = prefs.clock_mass(0.0);
  r.holds = true;
  for (std::size_t a = 0; a < qs.size(); ++a) {
    for (std::size_t b = 0; b < qs.size(); ++b) {
      if (a == b) continue;
      DichotomyCheck c;
      c.q_from = qs[a];
      c.q_to = qs[b];
      c.transferred = rhq_constant_transfer(r.estimates[a].implied_Cq, qs[a], qs[b], mu_total);
      c.worst_margin = std::numeric_limits<double>::infinity();
      c.holds = true;
      const auto& est = r.estimates[b];
      for (std::size_t j = 0; j < est.estimates.size(); ++j) {
        const double diff = est.estimates[j] - c.transferred;
        const double se = est.standard_errors[j];
        if (se > 0.0) c.worst_margin = std::min(c.worst_margin, diff / se);
        if (diff < -3.0 * se - 1e-12 * c.transferred) c.holds = false;
      }
      r.holds = r.holds && c.holds;
      r.checks.push_back(c);
    }
  }
  return r;
}

}  // namespace opproc
