#include <cmath>

#include "doctest.h"
#include "opproc/errors.hpp"
#include "opproc/montecarlo.hpp"

using namespace opproc;

namespace {

Preferences prefs_p(double p) { return Preferences::create(p, PiecewiseDiscount::constant(1.0)); }

struct Merton {
  double p;
  TimeGrid grid;
  LevyMarket market = LevyMarket::merton(0.05, 0.04, 1.0);
  Preferences prefs = prefs_p(p);
  double pi = 0.05 / ((1.0 - p) * 0.04);
  double gbar = 0.05 * pi - 0.5 * (1.0 - p) * 0.04 * pi * pi;
  OpportunityCurve curve = L_closed_form(a_param(gbar, p), p, grid);
  Strategy optimal = optimal_strategy(Vector::Constant(1, pi), curve);
};

LevyMarket no_trade_market() { return LevyMarket::create(Vector::Zero(1), Matrix::Zero(1, 1), {}, 1.0); }

}  // namespace

TEST_CASE("RunningStats") {
  RunningStats a, b;
  for (double x : {1.0, 2.0, 3.0}) a.add(x);
  for (double x : {4.0, 5.0}) b.add(x);
  a.merge(b);
  CHECK(a.n == 5.0);
  CHECK(a.mean() == 3.0);
  CHECK(a.variance() == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(a.se() == doctest::Approx(std::sqrt(2.5 / 5.0)).epsilon(1e-15));
}

TEST_CASE("checkpoint_indices") {
  CHECK(checkpoint_indices(TimeGrid{1.0, 500}, 10) ==
        std::vector<int>{0, 50, 100, 150, 200, 250, 300, 350, 400, 450, 500});
  CHECK(checkpoint_indices(TimeGrid{1.0, 3}, 10) == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("PathSource: streamed and materialized increments agree") {
  auto m = LevyMarket::create(Vector::Constant(1, 0.03), Matrix::Constant(1, 1, 0.04),
                              JumpMeasure{{{Vector::Constant(1, -0.1), 0.5}}, std::nullopt}, 1.0);
  TimeGrid grid{1.0, 30};
  auto bundle = simulate_returns(m, grid, 50, 77);
  auto streamed = PathSource::stream(m, grid, 50, 77);
  auto stored = PathSource::from_bundle(bundle);
  std::vector<double> s1(streamed.width()), s2(stored.width());
  for (std::size_t i : {0, 17, 49}) {
    auto a = streamed.increments(i, s1);
    auto b = stored.increments(i, s2);
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
}

TEST_CASE("primal test: deterministic no-trade market") {
  TimeGrid grid{1.0, 200};
  for (double p : {0.5, -1.0}) {
    auto curve = L_closed_form(0.0, p, grid);
    auto r = primal_martingale_test(prefs_p(p), optimal_strategy(Vector::Zero(1), curve), curve,
                                    PathSource::stream(no_trade_market(), grid, 4, 1), 1.0);
    for (double m : r.means) CHECK(m == doctest::Approx(std::pow(2.0, 1.0 - p) / p).epsilon(1e-12));
    CHECK(r.total_se == 0.0);
    CHECK(r.martingale());
  }
}

TEST_CASE("primal test: Merton optimal and perturbed") {
  Merton m{0.5, TimeGrid{1.0, 200}};
  auto paths = PathSource::stream(m.market, m.grid, 20000, 5);
  auto opt = primal_martingale_test(m.prefs, m.optimal, m.curve, paths, 1.0);
  CHECK(opt.checkpoints.size() == 11);
  CHECK(opt.means.front() == doctest::Approx(m.curve.L[0] / 0.5).epsilon(1e-12));
  CHECK(opt.martingale());
  CHECK(opt.n_rejected == 0);

  auto pert = m.optimal;
  pert.pi[0] += 0.5;
  PrimalTestOptions cv;
  cv.control = m.optimal;
  auto rep = primal_martingale_test(m.prefs, pert, m.curve, paths, 1.0, cv);
  CHECK(rep.supermartingale());
  CHECK(rep.total_change < 0.0);
  CHECK(rep.means.front() == opt.means.front());
}

TEST_CASE("dual supermartingale test") {
  Merton m{0.5, TimeGrid{1.0, 200}};
  auto paths = PathSource::stream(m.market, m.grid, 20000, 6);
  auto opt = dual_supermartingale_test(m.prefs, m.optimal, m.optimal, m.curve, paths, 1.0);
  CHECK(opt.martingale());
  CHECK(opt.means.front() == doctest::Approx(m.curve.L[0]).epsilon(1e-12));  // x0 y0 with x0 = 1

  auto idle = m.optimal;
  idle.pi[0] = 0.0;
  CHECK(dual_supermartingale_test(m.prefs, idle, m.optimal, m.curve, paths, 1.0).supermartingale());

  // bundle variant on the same numbers
  auto bundle = wealth_path(simulate_returns(m.market, m.grid, 2000, 6), m.optimal, 1.0,
                            ConsumptionMode::WithConsumption);
  auto ds = dual_process(m.curve, bundle, m.prefs);
  auto b = dual_supermartingale_test(bundle, ds, m.prefs);
  auto s = dual_supermartingale_test(m.prefs, m.optimal, m.optimal, m.curve,
                                     PathSource::stream(m.market, m.grid, 2000, 6), 1.0);
  for (std::size_t j = 0; j < b.means.size(); ++j) CHECK(b.means[j] == doctest::Approx(s.means[j]).epsilon(1e-13));
}

TEST_CASE("dual test: deterministic no-trade market") {
  TimeGrid grid{1.0, 100};
  auto curve = L_closed_form(0.0, 0.5, grid);
  auto s = optimal_strategy(Vector::Zero(1), curve);
  auto r = dual_supermartingale_test(prefs_p(0.5), s, s, curve, PathSource::stream(no_trade_market(), grid, 3, 1), 2.0);
  // x0 y0 = L_0 x0^p
  for (double v : r.means) CHECK(v == doctest::Approx(std::sqrt(2.0) * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(r.martingale());
}

TEST_CASE("dual value by Monte Carlo") {
  Merton m{-1.0, TimeGrid{1.0, 400}};
  auto rep = dual_value_mc(m.prefs, m.optimal, m.curve, PathSource::stream(m.market, m.grid, 20000, 9), 1.0);
  // -(1/q) y0^q L*_0 with x0 = 1
  const double y0 = m.curve.L[0];
  CHECK(rep.exact == doctest::Approx(-(1.0 / m.prefs.q()) * std::pow(y0, m.prefs.q()) * m.curve.Lstar[0]).epsilon(1e-14));
  CHECK(rep.holds);
}

TEST_CASE("rhq_estimate on deterministic and lognormal Y") {
  TimeGrid grid{1.0, 100};
  auto pr = prefs_p(0.5);
  ProcessPaths ones(grid, 5);
  std::fill(ones.values.begin(), ones.values.end(), 1.0);
  auto idx = checkpoint_indices(grid, 4);
  auto flat = rhq_estimate(ones, -1.0, pr, idx);
  for (std::size_t j = 0; j < idx.size(); ++j)
    CHECK(flat.estimates[j] == doctest::Approx(1.0 + 1.0 - grid.time(idx[j])).epsilon(1e-14));

  TimeGrid fine{1.0, 1000};
  auto Y = lognormal_paths(0.2, fine, 40000, 12);
  auto rep = rhq_estimate(Y, -1.0, pr, {0});
  // int_0^1 e^{0.04 s} ds + e^{0.04}
  CHECK(std::abs(rep.estimates[0] - 2.06108012900209389568) <= 3.0 * rep.standard_errors[0]);
}

TEST_CASE("rhq_constant_transfer") {
  CHECK(rhq_constant_transfer(3.7, 0.4, 0.4, 2.0) == 3.7);
  CHECK(rhq_constant_transfer(4.0, -1.0, 0.5, 2.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rhq_constant_transfer(1.3, 0.25, 0.5, 2.0) == doctest::Approx(1.3 * 1.3 / 2.0).epsilon(1e-15));
  // q < q1 < 0
  CHECK(rhq_constant_transfer(3.0, -2.0, -1.0, 2.0) == doctest::Approx(std::sqrt(2.0) * std::sqrt(3.0)).epsilon(1e-15));
  // converse 0 < q1 < q: mu^{(q1-q)/(1-q)} C^{(1-q1)/(1-q)}
  CHECK(rhq_constant_transfer(1.5, 0.5, 0.25, 2.0) ==
        doctest::Approx(std::pow(2.0, -0.5) * std::pow(1.5, 1.5)).epsilon(1e-15));
  for (auto [q, q1] : {std::pair{0.5, -1.0}, std::pair{-1.0, -2.0}}) {
    try {
      rhq_constant_transfer(2.0, q, q1, 2.0);
      FAIL("expected RegimeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RegimeMismatch);
    }
  }
}

TEST_CASE("phi_curve") {
  TimeGrid grid{1.0, 10};
  std::vector<double> qs{0.1, 0.3, 0.5, 0.7, 0.9};
  ProcessPaths ones(grid, 3);
  std::fill(ones.values.begin(), ones.values.end(), 1.0);
  auto c = phi_curve(ones, 0, 10, qs);
  for (double v : c.phi) CHECK(v == 1.0);

  // deterministic decreasing Y: phi(q) = r^{q/(1-q)}, r < 1
  ProcessPaths down(grid, 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (int k = 0; k <= 10; ++k) down.path(i)[k] = std::exp(-0.3 * grid.time(k));
  auto d = phi_curve(down, 0, 10, qs);
  CHECK(d.monotone);
  for (std::size_t j = 0; j < qs.size(); ++j)
    CHECK(d.phi[j] == doctest::Approx(std::exp(-0.3 * qs[j] / (1.0 - qs[j]))).epsilon(1e-13));

  auto Y = lognormal_paths(0.3, grid, 50000, 4);
  auto ln = phi_curve(Y, 0, 10, qs);
  CHECK(ln.monotone);
  for (std::size_t j = 0; j < qs.size(); ++j)
    CHECK(std::abs(ln.phi[j] - phi_lognormal(0.09, qs[j])) <= 3.0 * ln.se[j]);
  REQUIRE(ln.limit.has_value());
  CHECK(std::abs(*ln.limit - std::exp(-0.045)) <= 3.0 * ln.limit_se);
  CHECK(phi_lognormal(0.09, 0.5) == doctest::Approx(std::exp(-0.0225)).epsilon(1e-15));
}

TEST_CASE("ThetaModel") {
  ThetaModel th{{0.0, 0.5}, {0.25, -0.5}};
  CHECK(th(0.2) == 0.25);
  CHECK(th(0.5) == -0.5);
  CHECK(th.bound() == 0.5);
  CHECK(th.integral_sq(0.25, 0.75) == doctest::Approx(0.0625 * 0.25 + 0.25 * 0.25).epsilon(1e-15));
}

TEST_CASE("minimal measure density") {
  TimeGrid grid{1.0, 100};
  auto pr = prefs_p(0.5);
  auto z0 = minimal_measure_density(ThetaModel{}, grid, 10, 1);
  for (double v : z0.values) CHECK(v == 1.0);
  CHECK(minimal_measure_rhq_constant(ThetaModel{}, -1.0, pr) == 2.0);

  ThetaModel th{{0.0}, {0.25}};
  // exp(q(q-1)/2 int theta^2) = e^{0.0625 (s - tau)}, largest from tau = 0
  CHECK(minimal_measure_rhq_constant(th, -1.0, pr) == doctest::Approx(2.09640580160361030258).epsilon(1e-12));
  auto Z = minimal_measure_density(th, grid, 40000, 21);
  auto rep = rhq_estimate(Z, -1.0, pr, checkpoint_indices(grid, 5), minimal_measure_rhq_constant(th, -1.0, pr));
  CHECK(rep.holds);
  CHECK(std::abs(rep.estimates[0] - *rep.constant) <= 3.0 * rep.standard_errors[0] + 1e-4);
}

TEST_CASE("dichotomy on the Merton dual process") {
  Merton m{0.5, TimeGrid{1.0, 100}};
  auto Y = optimal_dual_paths(m.prefs, m.optimal, m.curve, PathSource::stream(m.market, m.grid, 20000, 31), 1.0);
  auto rep = rhq_dichotomy(Y, {0.25, 0.5, 0.75}, m.prefs, checkpoint_indices(m.grid, 5));
  CHECK(rep.holds);
  CHECK(rep.checks.size() == 6);
}
