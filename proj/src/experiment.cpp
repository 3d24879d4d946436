#include "opproc/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "opproc/errors.hpp"
#include "opproc/montecarlo.hpp"

namespace opproc {

namespace {

constexpr double kTol = 1e-9;

bool unit_discount(const Preferences& prefs) {
  return prefs.discount().is_constant() && prefs.discount().terminal() == 1.0;
}

void only_keys(const Json& obj, const std::string& tag, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; }) == allowed.end())
      throw Error(ErrorCode::Config, "unknown key '" + it.key() + "' for experiment " + tag);
}

std::vector<double> doubles(const Json& v) {
  std::vector<double> out;
  for (const auto& x : v) out.push_back(x.get<double>());
  return out;
}

TimeGrid grid_of(const ScenarioConfig& cfg) { return TimeGrid{cfg.prefs.horizon(), cfg.run.n_steps}; }

double gbar_for(const ScenarioConfig& cfg, const std::optional<ConstraintSet>& user, const Preferences& prefs) {
  const auto res = g_max(GFunction::make(cfg.market, prefs, user));
  if (res.status == MaxStatus::UnboundedAbove) throw Error(ErrorCode::UnboundedAbove, "g is unbounded above");
  return res.value;
}

ExperimentReport constraint_monotonicity(const ScenarioConfig& cfg) {
  const Json& e = cfg.run.experiment;
  only_keys(e, "constraint_monotonicity", {"intervals"});
  if (cfg.market.dim() != 1) throw Error(ErrorCode::Config, "constraint_monotonicity needs a one-asset market");
  std::vector<std::pair<double, double>> intervals{{-1.0, 1.0}, {-0.5, 0.5}, {0.0, 0.0}};
  if (e.contains("intervals")) {
    intervals.clear();
    for (const auto& iv : e["intervals"]) intervals.emplace_back(iv.at(0).get<double>(), iv.at(1).get<double>());
  }
  if (intervals.size() < 2) throw Error(ErrorCode::Config, "constraint_monotonicity needs at least two intervals");
  const Preferences& prefs = cfg.prefs;
  const double p = prefs.p();
  const TimeGrid grid = grid_of(cfg);

  ExperimentReport r;
  r.property = p > 0.0 ? "smaller constraint set gives smaller L and larger kappa"
                       : "smaller constraint set gives larger L and smaller kappa";
  r.passed = true;
  std::vector<OpportunityCurve> curves;
  for (std::size_t j = 0; j < intervals.size(); ++j) {
    const auto [lo, hi] = intervals[j];
    if (j > 0 && (lo < intervals[j - 1].first || hi > intervals[j - 1].second))
      throw Error(ErrorCode::Config, "constraint intervals must be nested, largest first");
    const double gbar = gbar_for(cfg, ConstraintSet::interval(lo, hi), prefs);
    r.metrics.emplace_back("gbar_" + std::to_string(j), gbar);
    curves.push_back(build_curve(gbar, prefs, grid));
  }
  double kappa_violation = 0.0;
  double L_violation = 0.0;
  for (std::size_t j = 1; j < curves.size(); ++j) {
    const auto& big = curves[j - 1];
    const auto& small = curves[j];
    for (std::size_t k = 0; k < big.size(); ++k) {
      // (1/p) L_small <= (1/p) L_big; kappa_big <= kappa_small for p > 0, reversed for p < 0
      L_violation = std::max(L_violation, (small.L[k] - big.L[k]) / p);
      kappa_violation = std::max(kappa_violation, p > 0.0 ? big.kappa[k] - small.kappa[k] : small.kappa[k] - big.kappa[k]);
    }
  }
  r.metrics.emplace_back("max_kappa_violation", kappa_violation);
  r.metrics.emplace_back("max_L_violation", L_violation);
  if (kappa_violation > kTol || L_violation > kTol) r.passed = false;
  if (intervals.back() == std::pair{0.0, 0.0} && unit_discount(prefs) && prefs.consumes()) {
    double err = 0.0;
    const auto& last = curves.back();
    for (std::size_t k = 0; k < last.size(); ++k)
      err = std::max(err, std::abs(last.kappa[k] - 1.0 / (1.0 + grid.horizon - last.time(k))));
    r.metrics.emplace_back("no_trade_kappa_error", err);
    if (err > kTol) r.passed = false;
  }
  return r;
}

ExperimentReport threshold(const ScenarioConfig& cfg) {
  const Json& e = cfg.run.experiment;
  only_keys(e, "threshold", {"p_values"});
  std::vector<double> ps = e.contains("p_values") ? doubles(e["p_values"]) : std::vector<double>{cfg.prefs.p()};
  ExperimentReport r;
  r.property = "kappa <= (k2/k1)^beta/(1+T-t) for p in (0,1), kappa >= (k1/k2)^beta/(1+T-t) for p < 0";
  r.passed = true;
  const TimeGrid grid = grid_of(cfg);
  for (double p : ps) {
    const Preferences prefs = cfg.prefs.with_p(p);
    const auto curve = build_curve(gbar_for(cfg, cfg.constraints, prefs), prefs, grid);
    const auto th = threshold_check(curve, prefs);
    r.metrics.emplace_back("max_violation_p=" + Json(p).dump(), th.max_violation);
    r.passed = r.passed && th.holds;
  }
  return r;
}

ExperimentReport tax_window(const ScenarioConfig& cfg) {
  const Json& e = cfg.run.experiment;
  only_keys(e, "tax_window", {"t1", "t2", "xi_breakpoints", "xi_values"});
  const double t1 = e.value("t1", 0.3);
  const double t2 = e.value("t2", 0.6);
  const auto xb = e.contains("xi_breakpoints") ? doubles(e["xi_breakpoints"]) : std::vector<double>{t1};
  const auto xv = e.contains("xi_values") ? doubles(e["xi_values"]) : std::vector<double>{0.5};
  const Preferences& prefs = cfg.prefs;
  if (!prefs.consumes()) throw Error(ErrorCode::Config, "tax_window needs intermediate consumption");
  const Preferences taxed = prefs.with_discount(prefs.discount().scaled_window(t1, t2, xb, xv));
  const TimeGrid grid = grid_of(cfg);
  const double gbar = gbar_for(cfg, cfg.constraints, prefs);
  const auto base = L_ode_solve(gbar, prefs, grid);
  const auto window = L_ode_solve(gbar, taxed, grid);

  const double inf = std::numeric_limits<double>::infinity();
  double before = inf, inside = inf, after = 0.0, L_before = inf;
  int n_before = 0, n_inside = 0, n_after = 0;
  for (std::size_t k = 0; k < base.size(); ++k) {
    const double t = base.time(k);
    const double diff = window.kappa[k] - base.kappa[k];
    if (t < t1) {
      before = std::min(before, -diff);
      L_before = std::min(L_before, window.L[k] - base.L[k]);
      ++n_before;
    } else if (t < t2) {
      inside = std::min(inside, diff);
      ++n_inside;
    } else {
      after = std::max(after, std::abs(diff));
      ++n_after;
    }
  }
  ExperimentReport r;
  r.property = "raising D on [t1,t2) lowers kappa before t1, raises it on [t1,t2), leaves it unchanged after t2";
  r.metrics = {{"min_kappa_drop_before", n_before ? before : 0.0},
               {"min_kappa_rise_inside", n_inside ? inside : 0.0},
               {"max_kappa_change_after", after},
               {"min_L_rise_before", n_before ? L_before : 0.0}};
  r.passed = (n_before == 0 || before > kTol) && (n_inside == 0 || inside > kTol) && after <= kTol &&
             (n_before == 0 || L_before > kTol);
  return r;
}

ExperimentReport rhq_dichotomy_experiment(const ScenarioConfig& cfg) {
  const Json& e = cfg.run.experiment;
  only_keys(e, "rhq_dichotomy", {"q_values", "n_tau"});
  const auto qs = e.contains("q_values") ? doubles(e["q_values"]) : std::vector<double>{0.25, 0.5, 0.75};
  const int n_tau = e.value("n_tau", 10);
  const std::uint64_t seed = require_seed(cfg.run, "rhq_dichotomy");
  const Solution sol = solve_scenario(cfg);
  const TimeGrid grid = grid_of(cfg);
  const auto src = PathSource::stream(cfg.market, grid, cfg.run.n_paths, seed);
  const auto Y = optimal_dual_paths(cfg.prefs, optimal_strategy(sol.max.argmax, sol.curve), sol.curve, src, cfg.run.x0);
  auto taus = checkpoint_indices(grid, n_tau);
  taus.pop_back();  // tau = T carries only the terminal mass
  const auto rep = rhq_dichotomy(Y, qs, cfg.prefs, taus);
  ExperimentReport r;
  r.property = "reverse Holder constant for one q in (0,1) transfers to every other q in (0,1)";
  for (std::size_t j = 0; j < qs.size(); ++j)
    r.metrics.emplace_back("implied_C_q=" + Json(qs[j]).dump(), rep.estimates[j].implied_Cq);
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& c : rep.checks) worst = std::min(worst, c.worst_margin);
  r.metrics.emplace_back("worst_margin_in_se", worst);
  r.passed = rep.holds;
  return r;
}

ExperimentReport kappa_lower_bound(const ScenarioConfig& cfg) {
  only_keys(cfg.run.experiment, "kappa_lower_bound", {});
  const auto& m = cfg.market;
  if (m.dim() != 1 || !m.effective_atoms().empty() || !(m.diffusion()(0, 0) > 0.0) || cfg.constraints)
    throw Error(ErrorCode::Config, "kappa_lower_bound needs an unconstrained one-asset diffusion market");
  const Preferences& prefs = cfg.prefs;
  const double theta = m.drift()[0] / std::sqrt(m.diffusion()(0, 0));
  const double q = prefs.q();
  const double Cq = minimal_measure_rhq_constant(ThetaModel{{0.0}, {theta}}, q, prefs);
  const double ratio = prefs.discount().k2() / prefs.discount().k1();
  const double beta = prefs.beta();
  const double bound = (prefs.p() > 0.0 ? std::pow(1.0 / ratio, beta) : std::pow(ratio, beta)) / Cq;
  const TimeGrid grid = grid_of(cfg);
  const auto curve = build_curve(gbar_for(cfg, std::nullopt, prefs), prefs, grid);
  double slack = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < curve.size(); ++k)
    slack = std::min(slack, prefs.p() > 0.0 ? curve.kappa[k] - bound : bound - curve.kappa[k]);
  ExperimentReport r;
  r.property = prefs.p() > 0.0 ? "kappa >= (k1/k2)^beta / C_q with C_q from the minimal martingale density"
                               : "kappa <= (k2/k1)^beta / C_q with C_q from the minimal martingale density";
  r.metrics = {{"C_q", Cq}, {"bound", bound}, {"min_slack", slack}};
  r.passed = slack >= -kTol;
  return r;
}

}  // namespace

OpportunityCurve build_curve(double gbar, const Preferences& prefs, const TimeGrid& grid) {
  if (unit_discount(prefs)) {
    if (prefs.consumes()) return L_closed_form(a_param(gbar, prefs.p()), prefs.p(), grid);
    return L_terminal_only(gbar, prefs.p(), grid);
  }
  return L_ode_solve(gbar, prefs, grid);
}

Solution solve_scenario(const ScenarioConfig& cfg) {
  Solution s;
  s.validation = validate_market(cfg.market, cfg.prefs);
  if (!s.validation.passed()) {
    std::string failed;
    for (const auto& c : s.validation.checks)
      if (!c.passed) failed += (failed.empty() ? "" : ", ") + c.name;
    throw Error(ErrorCode::InvalidArgument, "market validation failed: " + failed);
  }
  s.max = g_max(GFunction::make(cfg.market, cfg.prefs, cfg.constraints));
  if (s.max.status == MaxStatus::UnboundedAbove) throw Error(ErrorCode::UnboundedAbove, "g is unbounded above");
  s.curve = build_curve(s.max.value, cfg.prefs, TimeGrid{cfg.prefs.horizon(), cfg.run.n_steps});
  return s;
}

Json ExperimentReport::to_json() const {
  Json m = Json::object();
  for (const auto& [k, v] : metrics) m[k] = std::isfinite(v) ? Json(v) : Json(std::to_string(v));
  return Json{{"scenario", scenario}, {"tag", tag}, {"property", property}, {"passed", passed}, {"metrics", m}};
}

const std::vector<std::string>& experiment_tags() {
  static const std::vector<std::string> tags{"constraint_monotonicity", "threshold", "tax_window", "rhq_dichotomy",
                                             "kappa_lower_bound"};
  return tags;
}

ExperimentReport run_experiment(const ScenarioConfig& cfg, const std::string& tag) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport r;
  if (tag == "constraint_monotonicity") r = constraint_monotonicity(cfg);
  else if (tag == "threshold") r = threshold(cfg);
  else if (tag == "tax_window") r = tax_window(cfg);
  else if (tag == "rhq_dichotomy") r = rhq_dichotomy_experiment(cfg);
  else if (tag == "kappa_lower_bound") r = kappa_lower_bound(cfg);
  else throw Error(ErrorCode::UnknownTag, "unknown experiment tag '" + tag + "'");
  r.scenario = cfg.id;
  r.tag = tag;
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace opproc
