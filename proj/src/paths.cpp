#include "opproc/paths.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "opproc/errors.hpp"
#include "opproc/rng.hpp"

namespace opproc {

ReturnSampler::ReturnSampler(const LevyMarket& market, TimeGrid grid, std::uint64_t seed)
    : grid_(grid), seed_(seed), dim_(market.dim()) {
  if (grid.n_steps < 1) throw Error(ErrorCode::InvalidArgument, "n_steps must be >= 1");
  if (market.has_unbounded_density())
    throw Error(ErrorCode::InvalidArgument, "cannot simulate a jump density with unbounded support");
  const double dt = grid.horizon / grid.n_steps;
  drift_step_.resize(static_cast<std::size_t>(dim_));
  for (int i = 0; i < dim_; ++i)
    drift_step_[i] = (market.drift()[i] - market.compensator()[i]) * grid.horizon / grid.n_steps;
  const double sq = std::sqrt(dt);
  if (market.volatility().cwiseAbs().maxCoeff() > 0.0) {
    vol_step_.resize(static_cast<std::size_t>(dim_) * dim_);
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) vol_step_[i * dim_ + j] = market.volatility()(i, j) * sq;
  }
  double cum = 0.0;
  for (const auto& atom : market.effective_atoms()) {
    cum += atom.intensity;
    jump_cdf_.push_back(cum);
    for (int i = 0; i < dim_; ++i) jump_sizes_.push_back(atom.size[i]);
  }
  for (double& c : jump_cdf_) c /= cum;
  jump_rate_step_ = cum * dt;
}

void ReturnSampler::increments(std::size_t path, std::span<double> out) const {
  SubstreamRng rng(seed_, path);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  std::poisson_distribution<int> poisson(jump_rate_step_ > 0.0 ? jump_rate_step_ : 1.0);
  const std::size_t d = static_cast<std::size_t>(dim_);
  std::vector<double> z(d);

  for (int k = 0; k < grid_.n_steps; ++k) {
    double* inc = out.data() + static_cast<std::size_t>(k) * d;
    for (std::size_t i = 0; i < d; ++i) inc[i] = drift_step_[i];
    if (!vol_step_.empty()) {
      for (std::size_t j = 0; j < d; ++j) z[j] = normal(rng);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) inc[i] += vol_step_[i * d + j] * z[j];
    }
    if (jump_rate_step_ > 0.0) {
      const int n_jumps = poisson(rng);
      for (int m = 0; m < n_jumps; ++m) {
        const double u = uniform(rng);
        auto it = std::upper_bound(jump_cdf_.begin(), jump_cdf_.end(), u);
        const std::size_t atom =
            std::min(static_cast<std::size_t>(it - jump_cdf_.begin()), jump_cdf_.size() - 1);
        for (std::size_t i = 0; i < d; ++i) inc[i] += jump_sizes_[atom * d + i];
      }
    }
  }
}

Strategy Strategy::make(Vector pi, const std::function<double(double)>& kappa, const TimeGrid& grid) {
  Strategy s{std::move(pi), std::vector<double>(grid.n_points())};
  for (int k = 0; k < grid.n_steps; ++k) s.kappa[k] = kappa(grid.time(k));
  s.kappa[grid.n_steps] = 1.0;
  return s;
}

Strategy Strategy::terminal_only(Vector pi, const TimeGrid& grid) {
  Strategy s{std::move(pi), std::vector<double>(grid.n_points(), 0.0)};
  s.kappa[grid.n_steps] = 1.0;
  return s;
}

std::span<const double> PathBundle::path_returns(std::size_t i) const {
  const std::size_t w = static_cast<std::size_t>(grid.n_steps) * dim;
  return {returns.data() + i * w, w};
}

std::span<const double> PathBundle::path_wealth(std::size_t i) const {
  return {wealth.data() + i * grid.n_points(), grid.n_points()};
}

std::span<const double> PathBundle::path_consumption(std::size_t i) const {
  return {consumption.data() + i * grid.n_points(), grid.n_points()};
}

std::span<const double> PathBundle::path_dual(std::size_t i) const {
  return {dual.data() + i * grid.n_points(), grid.n_points()};
}

void PathBundle::write_csv(std::ostream& out) const {
  out << "path_id,t,";
  if (dim == 1) {
    out << "R";
  } else {
    for (int j = 0; j < dim; ++j) out << (j ? "," : "") << "R_" << (j + 1);
  }
  out << ",X,c,Y\n";
  out.precision(17);
  const std::size_t np = grid.n_points();
  std::vector<double> r(static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < n_paths; ++i) {
    std::fill(r.begin(), r.end(), 0.0);
    for (std::size_t k = 0; k < np; ++k) {
      if (k > 0 && !returns.empty()) {
        auto inc = path_returns(i);
        for (int j = 0; j < dim; ++j) r[j] += inc[(k - 1) * dim + j];
      }
      out << i << ',' << grid.time(static_cast<int>(k));
      for (int j = 0; j < dim; ++j) out << ',' << r[j];
      out << ',';
      if (!wealth.empty()) out << wealth[i * np + k];
      out << ',';
      if (!consumption.empty()) out << consumption[i * np + k];
      out << ',';
      if (!dual.empty()) out << dual[i * np + k];
      out << '\n';
    }
  }
}

PathBundle simulate_returns(const LevyMarket& market, const TimeGrid& grid, std::size_t n_paths,
                            std::uint64_t seed, Execution exec) {
  const ReturnSampler sampler(market, grid, seed);
  PathBundle b;
  b.seed = seed;
  b.grid = grid;
  b.n_paths = n_paths;
  b.dim = market.dim();
  const std::size_t w = sampler.increments_per_path();
  b.returns.resize(n_paths * w);
  b.rejected.assign(n_paths, 0);
  const auto n = static_cast<std::ptrdiff_t>(n_paths);
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
      sampler.increments(static_cast<std::size_t>(i), {b.returns.data() + i * w, w});
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i)
      sampler.increments(static_cast<std::size_t>(i), {b.returns.data() + i * w, w});
  }
  return b;
}

namespace {

void wealth_one(PathBundle& b, std::size_t i, const Strategy& s, double x0, bool consumes) {
  const std::size_t np = b.grid.n_points();
  double* x = b.wealth.data() + i * np;
  double* c = b.consumption.data() + i * np;
  if (!wealth_along(b.path_returns(i), s, b.grid.dt(), x0, consumes, {x, np})) {
    b.rejected[i] = 1;
    for (std::size_t k = 0; k < np; ++k) c[k] = std::isnan(x[k]) ? x[k] : (consumes ? s.kappa[k] * x[k] : 0.0);
    return;
  }
  for (std::size_t k = 0; k + 1 < np; ++k) c[k] = consumes ? s.kappa[k] * x[k] : 0.0;
  c[np - 1] = x[np - 1];
}

}  // namespace

bool wealth_along(std::span<const double> inc, const Strategy& s, double dt, double x0, bool consumes,
                  std::span<double> x) {
  const std::size_t d = static_cast<std::size_t>(s.pi.size());
  const std::span<const double> pi(s.pi.data(), d);
  x[0] = x0;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double m = wealth_multiplier(pi, inc.subspan(k * d, d), consumes ? s.kappa[k] * dt : 0.0);
    if (!(m > 0.0)) {
      std::fill(x.begin() + static_cast<std::ptrdiff_t>(k) + 1, x.end(), std::numeric_limits<double>::quiet_NaN());
      return false;
    }
    x[k + 1] = x[k] * m;
  }
  return true;
}

PathBundle wealth_path(PathBundle b, const Strategy& strategy, double x0, ConsumptionMode mode,
                       Execution exec) {
  if (!(x0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "initial capital x0 must be positive");
  if (strategy.pi.size() != b.dim) throw Error(ErrorCode::InvalidArgument, "strategy dimension mismatch");
  if (strategy.kappa.size() != b.grid.n_points())
    throw Error(ErrorCode::InvalidArgument, "kappa must have one value per grid point");
  const std::size_t np = b.grid.n_points();
  b.wealth.assign(b.n_paths * np, 0.0);
  b.consumption.assign(b.n_paths * np, 0.0);
  b.rejected.assign(b.n_paths, 0);
  const bool consumes = mode == ConsumptionMode::WithConsumption;
  const auto n = static_cast<std::ptrdiff_t>(b.n_paths);
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) wealth_one(b, static_cast<std::size_t>(i), strategy, x0, consumes);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) wealth_one(b, static_cast<std::size_t>(i), strategy, x0, consumes);
  }
  b.n_rejected = static_cast<std::size_t>(std::count(b.rejected.begin(), b.rejected.end(), 1));
  if (b.n_paths > 0 && b.n_rejected == b.n_paths)
    throw Error(ErrorCode::AllPathsRejected, "every path hit a nonpositive wealth multiplier");
  return b;
}

}  // namespace opproc
