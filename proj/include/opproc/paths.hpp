#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "opproc/grid.hpp"
#include "opproc/market.hpp"

namespace opproc {

enum class Execution { Serial, Parallel };

/// Draws the per-step increments of R for one path. Path i always uses substream i of the
/// seed, so any subset of paths can be regenerated independently and in any order.
class ReturnSampler {
 public:
  ReturnSampler(const LevyMarket& market, TimeGrid grid, std::uint64_t seed);

  const TimeGrid& grid() const { return grid_; }
  int dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t increments_per_path() const { return static_cast<std::size_t>(grid_.n_steps) * dim_; }

  /// Writes n_steps * dim increments, step-major.
  void increments(std::size_t path, std::span<double> out) const;

 private:
  TimeGrid grid_;
  std::uint64_t seed_;
  int dim_;
  std::vector<double> drift_step_;   // (b - int h dF) dt
  std::vector<double> vol_step_;     // A sqrt(dt), row-major dim x dim
  std::vector<double> jump_sizes_;   // atom-major, dim each
  std::vector<double> jump_cdf_;     // cumulative intensity share
  double jump_rate_step_ = 0.0;      // total intensity * dt
};

/// Per-step propensity to consume and constant proportions.
/// `kappa[k]` is used on [t_k, t_{k+1}); the entry at T is forced to 1.
struct Strategy {
  Vector pi;
  std::vector<double> kappa;

  static Strategy make(Vector pi, const std::function<double(double)>& kappa, const TimeGrid& grid);
  static Strategy terminal_only(Vector pi, const TimeGrid& grid);
};

/// Seeded Monte Carlo paths. Row-major per path: returns hold n_steps*dim increments,
/// wealth/consumption/dual hold n_steps+1 grid values. Rejected paths keep NaN after the
/// first nonpositive multiplier and are excluded from every estimator.
struct PathBundle {
  std::uint64_t seed = 0;
  TimeGrid grid;
  std::size_t n_paths = 0;
  int dim = 1;
  std::vector<double> returns;
  std::vector<double> wealth;
  std::vector<double> consumption;
  std::vector<double> dual;
  std::vector<std::uint8_t> rejected;
  std::size_t n_rejected = 0;

  std::span<const double> path_returns(std::size_t i) const;
  std::span<const double> path_wealth(std::size_t i) const;
  std::span<const double> path_consumption(std::size_t i) const;
  std::span<const double> path_dual(std::size_t i) const;
  std::size_t n_retained() const { return n_paths - n_rejected; }

  /// Columns path_id,t,R,X,c,Y (R_1..R_d in place of R when dim > 1). Empty columns are
  /// written for objects not yet filled.
  void write_csv(std::ostream& out) const;
};

PathBundle simulate_returns(const LevyMarket& market, const TimeGrid& grid, std::size_t n_paths,
                            std::uint64_t seed, Execution exec = Execution::Parallel);

/// X_{k+1} = X_k (1 + pi^T dR_k - kappa_k dt), the dt term only with consumption.
/// Throws AllPathsRejected if no path stays positive.
PathBundle wealth_path(PathBundle returns, const Strategy& strategy, double x0,
                       ConsumptionMode mode, Execution exec = Execution::Parallel);

/// One-step wealth multiplier; nonpositive values reject the path.
inline double wealth_multiplier(std::span<const double> pi, std::span<const double> dR,
                                double kappa_dt) {
  double gain = 0.0;
  for (std::size_t j = 0; j < pi.size(); ++j) gain += pi[j] * dR[j];
  return 1.0 + gain - kappa_dt;
}

/// Wealth along one path of increments into x (n_steps + 1 values). Returns false and fills the
/// remainder with NaN at the first nonpositive multiplier.
bool wealth_along(std::span<const double> increments, const Strategy& strategy, double dt, double x0,
                  bool consumes, std::span<double> x);

}  // namespace opproc
