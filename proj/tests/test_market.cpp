#include <cmath>
#include <limits>

#include "doctest.h"
#include "opproc/constraints.hpp"
#include "opproc/errors.hpp"
#include "opproc/market.hpp"
#include "opproc/paths.hpp"
#include "opproc/preferences.hpp"

using namespace opproc;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

LevyMarket atoms_market(std::vector<double> sizes, double intensity, double drift = 0.0, double var = 0.0) {
  JumpMeasure jumps;
  for (double x : sizes) jumps.atoms.push_back({Vector::Constant(1, x), intensity});
  return LevyMarket::create(Vector::Constant(1, drift), Matrix::Constant(1, 1, var), jumps, 1.0);
}

Preferences prefs_p(double p) { return Preferences::create(p, PiecewiseDiscount::constant(1.0)); }

void expect_throws_code(auto&& fn, ErrorCode code) {
  try {
    fn();
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == code);
  }
}

}  // namespace

TEST_CASE("discount step function") {
  auto d = PiecewiseDiscount::create(1.0, {0.0, 0.25, 0.5}, {1.0, 2.0, 0.5});
  CHECK(d(0.0) == 1.0);
  CHECK(d(0.25) == 2.0);  // right-continuous
  CHECK(d(0.4999) == 2.0);
  CHECK(d(1.0) == 0.5);
  CHECK(d.terminal() == 0.5);
  CHECK(d.k1() == 0.5);
  CHECK(d.k2() == 2.0);
  CHECK(d.integral(0.0, 1.0) == doctest::Approx(0.25 + 0.5 + 0.25).epsilon(1e-15));
  CHECK(d.integral(0.3, 0.6) == doctest::Approx(0.4 + 0.05).epsilon(1e-15));
  CHECK_FALSE(d.is_constant());
  CHECK(PiecewiseDiscount::constant(2.0, 3.0).integral(0.0, 2.0) == 6.0);

  expect_throws_code([] { PiecewiseDiscount::create(1.0, {0.1}, {1.0}); }, ErrorCode::InvalidArgument);
  expect_throws_code([] { PiecewiseDiscount::create(1.0, {0.0, 0.5}, {1.0, 0.0}); }, ErrorCode::InvalidArgument);
  expect_throws_code([] { PiecewiseDiscount::create(1.0, {0.0, 0.5, 0.5}, {1, 1, 1}); },
                     ErrorCode::InvalidArgument);
}

TEST_CASE("terminal weight set by a breakpoint at T") {
  auto d = PiecewiseDiscount::create(1.0, {0.0, 1.0}, {1.0, 3.0});
  CHECK(d(0.999) == 1.0);
  CHECK(d(1.0) == 3.0);
  CHECK(d.integral(0.0, 1.0) == 1.0);
}

TEST_CASE("tax window scaling") {
  auto d = PiecewiseDiscount::constant(1.0);
  auto w = d.scaled_window(0.3, 0.6, {0.3, 0.45}, {0.5, 0.25});
  CHECK(w(0.0) == 1.0);
  CHECK(w(0.3) == 1.5);
  CHECK(w(0.45) == 1.25);
  CHECK(w(0.6) == 1.0);
  CHECK(w(1.0) == 1.0);
  expect_throws_code([&] { d.scaled_window(0.3, 0.6, {0.3, 0.45}, {0.25, 0.5}); }, ErrorCode::InvalidArgument);
}

TEST_CASE("preferences") {
  auto pr = prefs_p(0.5);
  CHECK(pr.beta() == 2.0);
  CHECK(pr.q() == -1.0);
  CHECK(pr.clock_mass(0.0) == 2.0);
  CHECK(pr.clock_mass(1.0) == 1.0);
  CHECK(pr.utility(0.0, 4.0) == 4.0);
  auto terminal = Preferences::create(0.5, PiecewiseDiscount::constant(1.0), ConsumptionMode::TerminalOnly);
  CHECK(terminal.clock_mass(0.0) == 1.0);
  for (double bad : {0.0, 1.0, 1.5, std::nan("")})
    expect_throws_code([&] { prefs_p(bad); }, ErrorCode::InvalidArgument);
}

TEST_CASE("validate_market") {
  auto merton = LevyMarket::merton(0.05, 0.04, 1.0);
  auto rep = validate_market(merton, prefs_p(0.5));
  CHECK(rep.passed());
  CHECK(rep.find("s_positivity")->passed);
  CHECK(rep.find("non_monotone")->passed);

  auto crash = atoms_market({-1.2, 0.1}, 1.0);
  auto bad = validate_market(crash, prefs_p(0.5));
  CHECK_FALSE(bad.passed());
  CHECK_FALSE(bad.find("s_positivity")->passed);

  // net drift 0.2 - 0.1 >= 0 with only upward jumps
  auto up_only = LevyMarket::create(Vector::Constant(1, 0.2), Matrix::Zero(1, 1),
                                    JumpMeasure{{{Vector::Constant(1, 0.1), 1.0}}, std::nullopt}, 1.0);
  CHECK_FALSE(validate_market(up_only, prefs_p(0.5)).find("non_monotone")->passed);
  auto mixed = LevyMarket::create(Vector::Constant(1, 0.01), Matrix::Zero(1, 1),
                                  JumpMeasure{{{Vector::Constant(1, 0.1), 1.0}}, std::nullopt}, 1.0);
  CHECK(validate_market(mixed, prefs_p(0.5)).find("non_monotone")->passed);
}

TEST_CASE("p-moment condition with a heavy right tail") {
  // |x|^{-1.4} on [1, inf): finite mass (0.4^{-1}) but int x^{0.5} x^{-1.4} dx diverges.
  JumpDensity tail;
  tail.density = [](double x) { return std::pow(std::abs(x), -1.4); };
  tail.lo = 1.0;
  tail.hi = kInf;
  JumpMeasure jumps;
  jumps.atoms.push_back({Vector::Constant(1, -0.2), 1.0});
  jumps.density = tail;
  auto m = LevyMarket::create(Vector::Constant(1, 0.0), Matrix::Constant(1, 1, 0.04), jumps, 1.0);
  CHECK(m.has_unbounded_density());
  auto rep = validate_market(m, prefs_p(0.5));
  CHECK(rep.find("finite_activity")->passed);
  CHECK_FALSE(rep.find("p_moment")->passed);
  // p < 0: no moment condition.
  auto neg = validate_market(m, prefs_p(-1.0));
  CHECK(neg.find("p_moment") == nullptr);
  CHECK(neg.passed());

  // exponent 2.0: int x^{0.5-2} converges
  tail.density = [](double x) { return std::pow(std::abs(x), -2.0); };
  jumps.density = tail;
  auto light = LevyMarket::create(Vector::Constant(1, 0.0), Matrix::Constant(1, 1, 0.04), jumps, 1.0);
  CHECK(validate_market(light, prefs_p(0.5)).find("p_moment")->passed);
}

TEST_CASE("constraint_set in dimension one") {
  auto c1 = constraint_set(atoms_market({-0.5}, 1.0, 0.0, 0.04));
  CHECK(c1.lower[0] == -kInf);
  CHECK(c1.upper[0] == doctest::Approx(2.0).epsilon(1e-15));

  auto c2 = constraint_set(atoms_market({-0.5, 1.0}, 1.0));
  CHECK(c2.lower[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(c2.upper[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(c2.bounded());

  auto c3 = constraint_set(LevyMarket::merton(0.05, 0.04, 1.0));
  CHECK(c3.lower[0] == -kInf);
  CHECK(c3.upper[0] == kInf);

  auto user = constraint_set(atoms_market({-0.5, 1.0}, 1.0), ConstraintSet::interval(-0.25, 5.0));
  CHECK(user.lower[0] == -0.25);
  CHECK(user.upper[0] == doctest::Approx(2.0));

  auto pinned = constraint_set(LevyMarket::merton(0.05, 0.04, 1.0), ConstraintSet::interval(0.0, 0.0));
  CHECK(pinned.contains(Vector::Zero(1)));
  CHECK(pinned.pinned(0));

  for (const auto& c : {c1, c2, c3, user, pinned}) CHECK(c.contains(Vector::Zero(1)));

  expect_throws_code([] { constraint_set(atoms_market({-0.5}, 1.0), ConstraintSet::interval(0.5, 1.0)); },
                     ErrorCode::InvalidArgument);
}

TEST_CASE("constraint_set in dimension two") {
  JumpMeasure jumps;
  jumps.atoms.push_back({(Vector(2) << -0.5, -0.5).finished(), 1.0});
  auto m = LevyMarket::create(Vector::Zero(2), Matrix::Identity(2, 2) * 0.04, jumps, 1.0);
  auto c = constraint_set(m);
  CHECK(c.contains(Vector::Zero(2)));
  CHECK(c.contains((Vector(2) << 1.0, 1.0).finished()));
  CHECK_FALSE(c.contains((Vector(2) << 1.5, 1.0).finished(), 1e-12));
}

TEST_CASE("simulate_returns") {
  TimeGrid grid{1.0, 10};
  auto zero = LevyMarket::create(Vector::Zero(1), Matrix::Zero(1, 1), {}, 1.0);
  auto b0 = simulate_returns(zero, grid, 7, 1);
  for (double r : b0.returns) CHECK(r == 0.0);

  auto drift_only = LevyMarket::create(Vector::Constant(1, 0.05), Matrix::Zero(1, 1), {}, 1.0);
  auto b1 = simulate_returns(drift_only, grid, 5, 1);
  CHECK(b1.returns.size() == 50);
  for (double r : b1.returns) CHECK(r == doctest::Approx(0.005).epsilon(1e-15));

  // one unit step, variance 0.04: sample mean within 3 sd/sqrt(n) of zero
  const std::size_t n = 100000;
  auto b2 = simulate_returns(LevyMarket::merton(0.0, 0.04, 1.0), TimeGrid{1.0, 1}, n, 99);
  double sum = 0.0, sumsq = 0.0;
  for (double r : b2.returns) {
    sum += r;
    sumsq += r * r;
  }
  CHECK(std::abs(sum / n) <= 3.0 * 0.2 / std::sqrt(double(n)));
  CHECK(sumsq / n == doctest::Approx(0.04).epsilon(0.02));
}

TEST_CASE("jump increments are compensated by the cut-off") {
  // atom 0.1 at intensity 2: increments are 0.1 N - 0.2 dt, mean zero
  auto m = atoms_market({0.1}, 2.0);
  CHECK(m.compensator()[0] == doctest::Approx(0.2));
  auto b = simulate_returns(m, TimeGrid{1.0, 4}, 40000, 3);
  double sum = 0.0;
  for (double r : b.returns) sum += r;
  const double mean = sum / double(b.returns.size());
  // per-step variance 0.01 * 2 * 0.25
  CHECK(std::abs(mean) <= 3.0 * std::sqrt(0.005 / double(b.returns.size())));
  for (double r : b.returns) {
    const double jumps = (r + 0.05) / 0.1;
    CHECK(std::abs(jumps - std::round(jumps)) < 1e-9);
  }
}

TEST_CASE("simulate_returns is reproducible for a seed") {
  auto m = atoms_market({-0.1, 0.1}, 1.0, 0.03, 0.04);
  TimeGrid grid{1.0, 50};
  auto a = simulate_returns(m, grid, 300, 42);
  auto b = simulate_returns(m, grid, 300, 42);
  auto c = simulate_returns(m, grid, 300, 43);
  CHECK(a.returns == b.returns);
  CHECK(a.returns != c.returns);
}

TEST_CASE("wealth_path without noise") {
  const int n = 1000;
  TimeGrid grid{1.0, n};
  auto zero = LevyMarket::create(Vector::Zero(1), Matrix::Zero(1, 1), {}, 1.0);
  auto bundle = simulate_returns(zero, grid, 2, 5);
  auto kappa = [](double t) { return 1.0 / (2.0 - t); };
  auto w = wealth_path(bundle, Strategy::make(Vector::Zero(1), kappa, grid), 1.0,
                       ConsumptionMode::WithConsumption);
  auto x = w.path_wealth(1);
  auto c = w.path_consumption(1);
  double discrete = 1.0;
  for (int k = 0; k <= n; ++k) {
    const double t = grid.time(k);
    CHECK(x[k] == doctest::Approx(discrete).epsilon(1e-12));
    CHECK(x[k] == doctest::Approx((2.0 - t) / 2.0).epsilon(1e-3));
    if (k < n) {
      CHECK(c[k] == doctest::Approx(0.5).epsilon(1e-3));
      discrete *= 1.0 - kappa(t) * grid.dt();
    }
  }
  CHECK(c[n] == x[n]);

  auto hold = wealth_path(bundle, Strategy::terminal_only(Vector::Zero(1), grid), 3.0,
                          ConsumptionMode::TerminalOnly);
  for (double v : hold.path_wealth(0)) CHECK(v == 3.0);
}

TEST_CASE("wealth_path rejects nonpositive multipliers") {
  TimeGrid grid{1.0, 4};
  // a -0.5 jump with pi = 3 gives the multiplier 1 - 1.5 < 0
  auto m = atoms_market({-0.5, 0.5}, 1.0);
  auto bundle = simulate_returns(m, grid, 2000, 11);
  auto w = wealth_path(bundle, Strategy::terminal_only(Vector::Constant(1, 3.0), grid), 1.0,
                       ConsumptionMode::TerminalOnly);
  CHECK(w.n_rejected > 0);
  CHECK(w.n_rejected < w.n_paths);
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < w.n_paths; ++i) {
    auto x = w.path_wealth(i);
    if (w.rejected[i]) {
      ++flagged;
      CHECK(std::isnan(x.back()));
    } else {
      for (double v : x) CHECK(v > 0.0);
    }
  }
  CHECK(flagged == w.n_rejected);

  std::vector<double> inc{-0.5};
  std::vector<double> x(2);
  auto s = Strategy::terminal_only(Vector::Constant(1, 3.0), TimeGrid{1.0, 1});
  CHECK_FALSE(wealth_along(inc, s, 1.0, 1.0, false, x));
  CHECK(std::isnan(x[1]));

  // pi dR = -1.5 on every path: all rejected
  auto sure_loss = LevyMarket::create(Vector::Constant(1, -0.5), Matrix::Zero(1, 1), {}, 1.0);
  auto all = simulate_returns(sure_loss, TimeGrid{1.0, 1}, 10, 1);
  expect_throws_code([&] { wealth_path(all, Strategy::terminal_only(Vector::Constant(1, 3.0), all.grid), 1.0,
                                       ConsumptionMode::TerminalOnly); },
                     ErrorCode::AllPathsRejected);
}

TEST_CASE("geometric Brownian wealth mean") {
  // E[X_T] = exp(pi b T) for the discrete product as well as the continuous one
  const double b = 0.08, var = 0.04, pi = 1.5;
  TimeGrid grid{1.0, 20};
  auto bundle = simulate_returns(LevyMarket::merton(b, var, 1.0), grid, 100000, 17);
  auto w = wealth_path(bundle, Strategy::terminal_only(Vector::Constant(1, pi), grid), 1.0,
                       ConsumptionMode::TerminalOnly);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < w.n_paths; ++i) {
    const double xt = w.path_wealth(i).back();
    sum += xt;
    sumsq += xt * xt;
  }
  const double n = double(w.n_retained());
  const double mean = sum / n;
  const double se = std::sqrt((sumsq / n - mean * mean) / n);
  CHECK(std::abs(mean - std::pow(1.0 + pi * b * grid.dt(), grid.n_steps)) <= 3.0 * se);
  CHECK(std::abs(mean - std::exp(pi * b)) <= 3.0 * se + 1e-4);
}
