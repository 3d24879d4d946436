// Acceptance suite: one PASS/FAIL line per criterion; a criterion also fails when it overruns
// its time budget. Exit status is the number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "opproc/config.hpp"
#include "opproc/experiment.hpp"
#include "opproc/montecarlo.hpp"
#include "opproc/objective.hpp"
#include "opproc/rng.hpp"

using namespace opproc;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Preferences prefs_p(double p, ConsumptionMode mode = ConsumptionMode::WithConsumption) {
  return Preferences::create(p, PiecewiseDiscount::constant(1.0), mode);
}

LevyMarket jump_market() {
  JumpMeasure jumps;
  jumps.atoms.push_back({Vector::Constant(1, -0.1), 1.0});
  jumps.atoms.push_back({Vector::Constant(1, 0.1), 1.0});
  return LevyMarket::create(Vector::Constant(1, 0.02), Matrix::Zero(1, 1), jumps, 1.0);
}

double max_rel(const std::vector<double>& x, const std::vector<double>& y) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]) / std::abs(y[i]));
  return worst;
}

// 1. No-trade market: closed form of L and kappa.
void no_trade(Outcome& o) {
  const auto zero = LevyMarket::create(Vector::Zero(1), Matrix::Zero(1, 1), {}, 1.0);
  TimeGrid grid{1.0, 1000};
  double worst = 0.0;
  for (double p : {-2.0, -1.0, -0.5, 0.3, 0.5, 0.9}) {
    auto pr = prefs_p(p);
    auto best = g_max(GFunction::make(zero, pr));
    auto curve = L_closed_form(a_param(best.value, p), p, grid);
    auto kappa = kappa_hat(curve, pr);
    for (std::size_t k = 0; k < curve.size(); ++k) {
      const double tau = 1.0 - curve.time(k);
      worst = std::max(worst, std::abs(curve.L[k] / std::pow(1.0 + tau, 1.0 - p) - 1.0));
      worst = std::max(worst, std::abs(kappa[k] * (1.0 + tau) - 1.0));
    }
  }
  o.detail << "max rel err " << worst;
  o.require(worst <= 1e-12, "relative error <= 1e-12");
}

// 2. ODE against the closed form at D == 1.
void ode_vs_closed(Outcome& o) {
  TimeGrid grid{1.0, 1999};  // 2000 points
  double worst = 0.0;
  for (const auto& market : {LevyMarket::merton(0.05, 0.04, 1.0), jump_market()}) {
    for (double p : {-1.0, 0.5}) {
      auto pr = prefs_p(p);
      const double gbar = g_max(GFunction::make(market, pr)).value;
      worst = std::max(worst, max_rel(L_ode_solve(gbar, pr, grid).L, L_closed_form(a_param(gbar, p), p, grid).L));
    }
  }
  o.detail << "max rel diff " << worst;
  o.require(worst <= 1e-6, "relative difference <= 1e-6");
}

// 3. g_max against a dense grid scan on random bounded domains.
void optimizer_oracle(Outcome& o) {
  SubstreamRng rng(3, 0);
  auto unif = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    JumpMeasure jumps;
    const int n_atoms = 1 + i % 3;
    for (int j = 0; j < n_atoms; ++j)
      jumps.atoms.push_back({Vector::Constant(1, j % 2 ? unif(0.05, 0.8) : unif(-0.8, -0.05)), unif(0.1, 2.0)});
    auto m = LevyMarket::create(Vector::Constant(1, unif(-0.15, 0.15)), Matrix::Constant(1, 1, unif(0.0, 0.08)),
                                jumps, 1.0);
    const double p = i % 2 ? unif(0.1, 0.9) : unif(-3.0, -0.1);
    auto user = ConstraintSet::interval(-unif(0.2, 4.0), unif(0.2, 4.0));
    auto f = GFunction::make(m, prefs_p(p), user);
    auto res = g_max(f);
    auto scan = g_grid_scan(f, f.domain.lower[0], f.domain.upper[0], 1000000);
    const double gap = res.value - scan.value;
    worst = std::max(worst, std::abs(gap));
    o.require(gap >= -1e-8 && gap <= 1e-8, "market " + std::to_string(i) + " within 1e-8");
  }
  o.detail << "max |g_max - scan| " << worst;
}

// 4. Martingale optimality principle in the Merton market.
void martingale_principle(Outcome& o) {
  const auto market = LevyMarket::merton(0.05, 0.04, 1.0);
  const double p = 0.5;
  TimeGrid grid{1.0, 500};
  auto pr = prefs_p(p);
  auto best = g_max(GFunction::make(market, pr));
  auto curve = L_closed_form(a_param(best.value, p), p, grid);
  auto opt = optimal_strategy(best.argmax, curve);
  auto paths = PathSource::stream(market, grid, 100000, 20240611);

  auto flat = primal_martingale_test(pr, opt, curve, paths, 1.0);
  o.detail << "optimal E[I_T]-E[I_0] " << flat.total_change << " (se " << flat.total_se << ")";
  o.require(flat.checkpoints.size() == 11, "10 checkpoint intervals");
  o.require(flat.martingale(), "optimal pair flat within 3 se");

  auto pert = opt;
  pert.pi[0] += 0.5;
  PrimalTestOptions cv;
  cv.control = opt;
  auto down = primal_martingale_test(pr, pert, curve, paths, 1.0, cv);
  o.detail << "; pi+0.5 " << down.total_change << " (se " << down.total_se << ")";
  o.require(down.supermartingale(), "perturbed pair supermartingale");
  o.require(down.strict_decrease(), "perturbed pair decreases beyond 3 se");
}

// 5. Dual identities.
void dual_identities(Outcome& o) {
  SubstreamRng rng(5, 0);
  auto unif = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double p = i % 2 ? unif(0.05, 0.95) : unif(-5.0, -0.05);
    auto rep = conjugacy_check(std::exp(unif(-2.0, 2.0)), prefs_p(p), std::exp(unif(-3.0, 3.0)));
    worst = std::max(worst, rep.relative_gap);
    o.require(rep.passed, "conjugacy tuple " + std::to_string(i));
  }
  o.detail << "max conjugacy gap " << worst;

  const auto market = LevyMarket::merton(0.05, 0.04, 1.0);
  TimeGrid grid{1.0, 1000};
  auto pr = prefs_p(0.5);
  auto best = g_max(GFunction::make(market, pr));
  auto curve = L_closed_form(a_param(best.value, 0.5), 0.5, grid);
  auto rep = dual_value_mc(pr, optimal_strategy(best.argmax, curve), curve,
                           PathSource::stream(market, grid, 100000, 20240612), 1.0);
  o.detail << "; dual MC " << rep.estimate << " vs " << rep.exact << " (se " << rep.se << ")";
  o.require(rep.holds, "dual value within 3 se");
}

// 6. Reverse Hoelder suite.
void reverse_hoelder(Outcome& o) {
  TimeGrid grid{1.0, 50};
  const double sigma = 0.3;
  auto Y = lognormal_paths(sigma, grid, 100000, 61);
  std::vector<double> qs{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  auto phi = phi_curve(Y, 0, grid.n_steps, qs);
  double worst = 0.0;
  for (std::size_t j = 0; j < qs.size(); ++j) {
    const double z = std::abs(phi.phi[j] - phi_lognormal(sigma * sigma, qs[j])) / phi.se[j];
    worst = std::max(worst, z);
  }
  o.detail << "lognormal phi max |z| " << worst;
  o.require(worst <= 3.0, "phi within 3 se of exp(-sigma^2 q / 2)");
  o.require(phi.monotone, "phi monotone");

  const auto market = LevyMarket::merton(0.05, 0.04, 1.0);
  TimeGrid mg{1.0, 200};
  auto pr = prefs_p(0.5);
  auto best = g_max(GFunction::make(market, pr));
  auto curve = L_closed_form(a_param(best.value, 0.5), 0.5, mg);
  auto Yhat = optimal_dual_paths(pr, optimal_strategy(best.argmax, curve), curve,
                                 PathSource::stream(market, mg, 100000, 62), 1.0);
  auto dich = rhq_dichotomy(Yhat, {0.25, 0.5, 0.75}, pr, checkpoint_indices(mg, 10));
  double margin = INFINITY;
  for (const auto& c : dich.checks) margin = std::min(margin, c.worst_margin);
  o.detail << "; dichotomy checks " << dich.checks.size() << " worst margin " << margin << " se";
  o.require(dich.holds && dich.checks.size() == 6, "dichotomy across three q");

  ThetaModel theta{{0.0, 0.3, 0.7}, {0.25, -0.4, 0.1}};
  TimeGrid zg{1.0, 200};
  auto Z = minimal_measure_density(theta, zg, 100000, 63);
  const double C = minimal_measure_rhq_constant(theta, -1.0, pr);
  auto rq = rhq_estimate(Z, -1.0, pr, checkpoint_indices(zg, 10), C);
  o.detail << "; minimal measure R_-1 max " << rq.implied_Cq << " vs C " << C;
  o.require(rq.holds, "minimal-measure density satisfies R_q at q = -1");
}

ScenarioConfig scenario(const std::string& json) { return parse_scenario(Json::parse(json), "acceptance"); }

// 7. Economics suite.
void economics(Outcome& o) {
  int passed = 0, total = 0;
  auto run = [&](const std::string& json, const std::string& tag) {
    auto rep = run_experiment(scenario(json), tag);
    ++total;
    passed += rep.passed;
    o.require(rep.passed, tag);
  };
  const std::string market = R"("market": {"drift": [0.05], "diffusion": [[0.04]], "jump_atoms": [{"size": [-0.3], "intensity": 0.2}]})";
  for (const char* p : {"0.5", "-1.0"}) {
    run("{" + market + R"(, "preferences": {"p": )" + p +
            R"(, "discount_breakpoints": [0.0, 0.5], "discount_values": [1.0, 1.5]},
             "run": {"n_steps": 1000, "experiment": {"p_values": [)" + p + "]}}}",
        "threshold");
    run("{" + market + R"(, "preferences": {"p": )" + p +
            R"(}, "run": {"n_steps": 1000, "experiment": {"intervals": [[-2, 2], [-1, 1], [-0.5, 0.5], [0, 0]]}}})",
        "constraint_monotonicity");
    run("{" + market + R"(, "preferences": {"p": )" + p +
            R"(}, "run": {"n_steps": 1000, "experiment": {"t1": 0.3, "t2": 0.6, "xi_breakpoints": [0.3, 0.45], "xi_values": [0.5, 0.2]}}})",
        "tax_window");
  }
  o.detail << passed << "/" << total << " experiments";
}

// 8. No-trade comparison bounds.
void bounds(Outcome& o) {
  TimeGrid grid{1.0, 1000};
  const auto zero = LevyMarket::create(Vector::Zero(1), Matrix::Zero(1, 1), {}, 1.0);
  int cases = 0;
  for (double p : {0.5, -1.0}) {
    auto pr = prefs_p(p);
    auto eq = bounds_check(L_closed_form(a_param(g_max(GFunction::make(zero, pr)).value, p), p, grid), pr);
    o.require(eq.holds && eq.equality, "equality in the no-trade market, p = " + std::to_string(p));
    for (const auto& m : {LevyMarket::merton(0.05, 0.04, 1.0), jump_market()}) {
      auto rep = bounds_check(L_closed_form(a_param(g_max(GFunction::make(m, pr)).value, p), p, grid), pr);
      o.require(rep.holds && rep.strict, "strict inequality, p = " + std::to_string(p));
      ++cases;
    }
    auto stepped = pr.with_discount(PiecewiseDiscount::create(1.0, {0.0, 0.5}, {1.0, 1.5}));
    auto rep = bounds_check(L_ode_solve(g_max(GFunction::make(LevyMarket::merton(0.05, 0.04, 1.0), stepped)).value,
                                        stepped, grid),
                            stepped);
    o.require(rep.holds && rep.strict, "strict inequality with step discount, p = " + std::to_string(p));
    ++cases;
  }
  o.detail << "equality in 2 no-trade cases, strict in " << cases << " trading cases";
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<void(Outcome&)> body;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "no-trade closed form", 1.0, no_trade},
      {2, "closed form vs ODE", 5.0, ode_vs_closed},
      {3, "optimizer vs grid scan", 30.0, optimizer_oracle},
      {4, "martingale optimality principle", 60.0, martingale_principle},
      {5, "dual identities", 60.0, dual_identities},
      {6, "reverse Hoelder suite", 120.0, reverse_hoelder},
      {7, "economics suite", 10.0, economics},
      {8, "bounds suite", 1.0, bounds},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_seconds) {
      o.ok = false;
      o.detail << " [over budget]";
    }
    failed += !o.ok;
    std::printf("%s  %d  %-32s %7.2f s / %5.0f s  %s\n", o.ok ? "PASS" : "FAIL", c.id, c.name, secs, c.budget_seconds,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed;
}
