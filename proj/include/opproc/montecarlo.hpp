#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opproc/duality.hpp"
#include "opproc/market.hpp"
#include "opproc/opportunity.hpp"
#include "opproc/paths.hpp"
#include "opproc/preferences.hpp"

namespace opproc {

/// Mergeable (n, sum, sumsq) accumulator.
struct RunningStats {
  double n = 0.0;
  double sum = 0.0;
  double sumsq = 0.0;

  void add(double x) {
    n += 1.0;
    sum += x;
    sumsq += x * x;
  }
  void merge(const RunningStats& o) {
    n += o.n;
    sum += o.sum;
    sumsq += o.sumsq;
  }
  double mean() const { return n > 0.0 ? sum / n : 0.0; }
  double variance() const;
  double se() const;
};

/// Increments of R for n paths, either read from a materialized bundle or regenerated per path
/// from (market, grid, seed). Both give identical numbers for the same seed.
class PathSource {
 public:
  static PathSource stream(const LevyMarket& market, const TimeGrid& grid, std::size_t n_paths,
                           std::uint64_t seed);
  static PathSource from_bundle(const PathBundle& bundle);

  std::size_t n_paths() const { return n_paths_; }
  const TimeGrid& grid() const { return grid_; }
  int dim() const { return dim_; }
  std::size_t width() const { return static_cast<std::size_t>(grid_.n_steps) * dim_; }
  /// `scratch` must hold width() values; the returned span may alias it.
  std::span<const double> increments(std::size_t path, std::span<double> scratch) const;

 private:
  PathSource(TimeGrid grid, std::size_t n, int dim) : grid_(grid), n_paths_(n), dim_(dim) {}
  TimeGrid grid_;
  std::size_t n_paths_;
  int dim_;
  std::optional<ReturnSampler> sampler_;
  const PathBundle* bundle_ = nullptr;
};

/// Strategy (pi_hat, kappa_hat) on the curve's grid.
Strategy optimal_strategy(const Vector& pi_hat, const OpportunityCurve& curve);

/// Grid indices round(j n_steps / n), j = 0..n (deduplicated).
std::vector<int> checkpoint_indices(const TimeGrid& grid, int n);

enum class Verdict { ConsistentMartingale, ConsistentSupermartingale, Violation };
const char* to_string(Verdict v);

/// Means at checkpoints, with verdicts on adjacent pairs computed from the per-path
/// differences (paired standard errors).
struct MartingaleTestReport {
  std::vector<double> checkpoints;
  std::vector<double> means;
  std::vector<double> standard_errors;
  std::vector<double> step_means;   // E[V_{j+1} - V_j]
  std::vector<double> step_se;
  std::vector<Verdict> verdicts;
  double total_change = 0.0;        // E[V_last - V_first]
  double total_se = 0.0;
  std::size_t n_paths = 0;
  std::size_t n_rejected = 0;

  bool martingale() const;
  bool supermartingale() const;
  /// E[V_last - V_first] < -3 se
  bool strict_decrease() const;
};

struct PrimalTestOptions {
  int n_checkpoints = 10;
  /// When set, the tested quantity is I(strategy) - I(control) + I_0 per path. It has the same
  /// expectation as I(strategy) but the common noise cancels.
  std::optional<Strategy> control;
  Execution exec = Execution::Parallel;
};

/// I_t = L_t X_t^p / p + int_0^t U_s(c_s) ds with consumption evaluated at left endpoints.
MartingaleTestReport primal_martingale_test(const Preferences& prefs, const Strategy& strategy,
                                            const OpportunityCurve& curve, const PathSource& paths,
                                            double x0, const PrimalTestOptions& options = {});

/// Z_t = X_t Y_t + int_0^t c_s Y_s ds on a filled bundle and matching dual paths.
MartingaleTestReport dual_supermartingale_test(const PathBundle& wealth, const DualState& dual,
                                               const Preferences& prefs, int n_checkpoints = 10);

/// Streaming variant: X from `strategy`, Y = L X_hat^{p-1} from `optimal` on the same paths.
MartingaleTestReport dual_supermartingale_test(const Preferences& prefs, const Strategy& strategy,
                                               const Strategy& optimal, const OpportunityCurve& curve,
                                               const PathSource& paths, double x0, int n_checkpoints = 10,
                                               Execution exec = Execution::Parallel);

/// Y_hat = L X_hat^{p-1} on every path (rejected rows NaN).
ProcessPaths optimal_dual_paths(const Preferences& prefs, const Strategy& optimal,
                                const OpportunityCurve& curve, const PathSource& paths, double x0,
                                Execution exec = Execution::Parallel);

struct DualValueReport {
  double estimate = 0.0;
  double se = 0.0;
  double exact = 0.0;
  bool holds = false;  // |estimate - exact| <= 3 se
};

/// E[int U*(Y_hat_t) mu°(dt)] by the trapezoid rule plus the terminal mass, against
/// -(1/q) y0^q L*_0.
DualValueReport dual_value_mc(const Preferences& prefs, const Strategy& optimal, const OpportunityCurve& curve,
                              const PathSource& paths, double x0, Execution exec = Execution::Parallel);
DualValueReport dual_value_mc(const DualState& dual, const Preferences& prefs);

struct RhqReport {
  double q = 0.0;
  std::vector<double> tau_grid;
  std::vector<double> estimates;
  std::vector<double> standard_errors;
  /// max estimate for q < 0, min for q in (0,1)
  double implied_Cq = 0.0;
  std::optional<double> constant;
  bool holds = true;
};

/// int_tau^T E[(Y_s/Y_tau)^q] mu°(ds) per tau index, averaging the pathwise ratios (exact in
/// law when Y has independent multiplicative increments). `constant`, when given, is compared
/// within 3 se: estimates <= C for q < 0, >= C for q in (0,1).
RhqReport rhq_estimate(const ProcessPaths& Y, double q, const Preferences& prefs,
                       const std::vector<int>& tau_indices, std::optional<double> constant = std::nullopt,
                       Execution exec = Execution::Parallel);

/// Transfers an R_q constant to exponent q1. Throws RegimeMismatch outside the supported orderings.
double rhq_constant_transfer(double Cq, double q, double q1, double mu_total);

struct PhiReport {
  std::vector<double> q_grid;
  std::vector<double> phi;
  std::vector<double> se;
  bool monotone = true;
  /// exp(-E[rho log rho]) with rho = Y_s / Y_t normalized to unit mean; nullopt if not finite
  std::optional<double> limit;
  double limit_se = 0.0;
};

/// phi(q) = E[(Y_s/Y_t)^q]^{1/(1-q)} for q in (0,1).
PhiReport phi_curve(const ProcessPaths& Y, int t_index, int s_index, const std::vector<double>& q_grid);

/// Lognormal martingale ratio with log-variance sigma2: phi(q) = exp(-sigma2 q / 2).
double phi_lognormal(double sigma2, double q);

/// Exact simulation of Y_t = exp(sigma W_t - sigma^2 t / 2).
ProcessPaths lognormal_paths(double sigma, const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                             Execution exec = Execution::Parallel);

/// Bounded deterministic market price of risk, right-continuous step function.
struct ThetaModel {
  std::vector<double> breakpoints{0.0};
  std::vector<double> values{0.0};

  double operator()(double t) const;
  /// int_a^b theta^2 ds
  double integral_sq(double a, double b) const;
  double bound() const;
};

/// Z = E(-theta . W), simulated with exact Gaussian log-increments.
ProcessPaths minimal_measure_density(const ThetaModel& theta, const TimeGrid& grid, std::size_t n_paths,
                                     std::uint64_t seed, Execution exec = Execution::Parallel);

/// sup over tau (q < 0) or inf (q in (0,1)) of int_tau^T exp(q(q-1)/2 int_tau^s theta^2) mu°(ds),
/// the exact R_q constant of Z under deterministic theta.
double minimal_measure_rhq_constant(const ThetaModel& theta, double q, const Preferences& prefs);

struct DichotomyCheck {
  double q_from = 0.0;
  double q_to = 0.0;
  double transferred = 0.0;
  double worst_margin = 0.0;  // min over tau of (estimate - transferred) / se
  bool holds = false;
};

struct DichotomyReport {
  std::vector<RhqReport> estimates;
  std::vector<DichotomyCheck> checks;
  bool holds = false;
};

/// For each q in (0,1) of `qs`, takes the implied constant and checks every other q1 against the
/// transferred constant (estimate >= C_{q1} - 3 se at every tau).
DichotomyReport rhq_dichotomy(const ProcessPaths& Y, const std::vector<double>& qs, const Preferences& prefs,
                              const std::vector<int>& tau_indices, Execution exec = Execution::Parallel);

}  // namespace opproc
