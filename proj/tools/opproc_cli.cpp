// opproc: solve, opportunity, dual, verify and experiment subcommands over JSON scenario files.
//
// Exit codes: 0 ok, 1 unexpected internal error, 2 invalid config / validation failure,
// 3 objective unbounded above, 4 a verification or experiment verdict failed,
// 5 numerical failure (InvalidA, StepPositivityLoss, AllPathsRejected, DomainBoundary, RegimeMismatch).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "opproc/config.hpp"
#include "opproc/duality.hpp"
#include "opproc/errors.hpp"
#include "opproc/experiment.hpp"
#include "opproc/montecarlo.hpp"

using namespace opproc;

namespace {

enum Exit { kOk = 0, kInternal = 1, kInvalid = 2, kUnbounded = 3, kVerdict = 4, kNumerical = 5 };

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string format;
  bool timing = false;
  int grid_points = 0;
  std::optional<std::size_t> paths;
  std::optional<double> q;
  std::string test;
  std::string tag;
  double delta = 0.5;
};

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::EmptyInterior:
    case ErrorCode::Config:
    case ErrorCode::UnknownTag: return kInvalid;
    case ErrorCode::UnboundedAbove: return kUnbounded;
    default: return kNumerical;
  }
}

Json vec(const std::vector<double>& v) { return Json(v); }

Json vec(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Json verdicts(const MartingaleTestReport& r) {
  Json out = Json::array();
  for (auto v : r.verdicts) out.push_back(to_string(v));
  return out;
}

Json martingale_json(const MartingaleTestReport& r) {
  return Json{{"checkpoints", vec(r.checkpoints)},
              {"means", vec(r.means)},
              {"standard_errors", vec(r.standard_errors)},
              {"verdicts", verdicts(r)},
              {"total_change", r.total_change},
              {"total_se", r.total_se},
              {"martingale", r.martingale()},
              {"supermartingale", r.supermartingale()},
              {"strict_decrease", r.strict_decrease()},
              {"n_paths", r.n_paths},
              {"n_rejected", r.n_rejected}};
}

Json rhq_json(const RhqReport& r) {
  Json j{{"q", r.q}, {"tau", vec(r.tau_grid)}, {"estimates", vec(r.estimates)},
         {"standard_errors", vec(r.standard_errors)}, {"implied_Cq", r.implied_Cq}, {"holds", r.holds}};
  if (r.constant) j["constant"] = *r.constant;
  return j;
}

class Output {
 public:
  Output(const Options& o, const ScenarioConfig& cfg, const std::string& sub)
      : dir_(o.out.empty() ? cfg.run.out : o.out), stem_(cfg.id + "." + sub) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }
  void file(const std::string& suffix, const std::string& content) const {
    if (dir_.empty()) return;
    std::ofstream f(std::filesystem::path(dir_) / (stem_ + suffix));
    f << content;
  }

 private:
  std::string dir_;
  std::string stem_;
};

std::string format_of(const Options& o, const ScenarioConfig& cfg) { return o.format.empty() ? cfg.run.format : o.format; }

std::uint64_t seed_of(const Options& o, const ScenarioConfig& cfg, const std::string& what) {
  RunSection run = cfg.run;
  if (o.seed) run.seed = o.seed;
  return require_seed(run, what);
}

std::size_t paths_of(const Options& o, const ScenarioConfig& cfg) { return o.paths.value_or(cfg.run.n_paths); }

// --- solve -----------------------------------------------------------------------------------

int run_solve(const Options& o, const ScenarioConfig& cfg, std::ostream& out) {
  const Output files(o, cfg, "solve");
  Json j{{"scenario", cfg.id}};
  const auto validation = validate_market(cfg.market, cfg.prefs);
  Json checks = Json::object();
  for (const auto& c : validation.checks) checks[c.name] = Json{{"passed", c.passed}, {"detail", c.detail}};
  j["validation"] = checks;
  if (!validation.passed()) {
    j["status"] = "ValidationFailed";
    out << j.dump(2) << '\n';
    files.file(".json", j.dump(2) + "\n");
    return kInvalid;
  }
  const GFunction g = GFunction::make(cfg.market, cfg.prefs, cfg.constraints);
  const auto res = g_max(g);
  j["y_star"] = vec(res.argmax);
  j["g_bar"] = res.value;
  j["status"] = to_string(res.status);
  j["first_order_residual"] = res.first_order_residual;
  j["iterations"] = res.iterations;
  if (res.status == MaxStatus::UnboundedAbove) {
    out << j.dump(2) << '\n';
    files.file(".json", j.dump(2) + "\n");
    return kUnbounded;
  }
  const auto curve = build_curve(res.value, cfg.prefs, TimeGrid{cfg.prefs.horizon(), cfg.run.n_steps});
  const auto bounds = bounds_check(curve, cfg.prefs);
  j["a"] = curve.a_param;
  j["L0"] = curve.L.front();
  j["kappa0"] = curve.kappa.front();
  j["curve_source"] = curve.source == CurveSource::ClosedForm ? "ClosedForm" : "ODE";

  std::ostringstream curve_csv;
  write_curve_csv(curve_csv, curve, bounds);
  std::ostringstream grid_csv;
  if (o.grid_points > 1 && cfg.market.dim() == 1) {
    const double lo = std::isfinite(g.domain.lower[0]) ? g.domain.lower[0] : res.argmax[0] - 5.0;
    const double hi = std::isfinite(g.domain.upper[0]) ? g.domain.upper[0] : res.argmax[0] + 5.0;
    grid_csv.precision(17);
    grid_csv << "y,g\n";
    for (int k = 0; k < o.grid_points; ++k) {
      const double y = lo + (hi - lo) * k / (o.grid_points - 1);
      grid_csv << y << ',' << g_eval(g, y) << '\n';
    }
    files.file(".grid.csv", grid_csv.str());
  }
  files.file(".json", j.dump(2) + "\n");
  files.file(".curve.csv", curve_csv.str());
  if (format_of(o, cfg) == "csv") out << curve_csv.str();
  else out << j.dump(2) << '\n';
  return kOk;
}

// --- opportunity -----------------------------------------------------------------------------

int run_opportunity(const Options& o, const ScenarioConfig& cfg, std::ostream& out) {
  const Output files(o, cfg, "opportunity");
  const Solution sol = solve_scenario(cfg);
  const auto bounds = bounds_check(sol.curve, cfg.prefs);
  const auto th = threshold_check(sol.curve, cfg.prefs);
  std::ostringstream csv;
  write_curve_csv(csv, sol.curve, bounds);
  Json j{{"scenario", cfg.id},
         {"a", sol.curve.a_param},
         {"source", sol.curve.source == CurveSource::ClosedForm ? "ClosedForm" : "ODE"},
         {"L0", sol.curve.L.front()},
         {"kappa0", sol.curve.kappa.front()},
         {"bounds", Json{{"holds", bounds.holds}, {"uniform_holds", bounds.uniform_holds},
                         {"equality", bounds.equality}, {"strict", bounds.strict}, {"min_slack", bounds.min_slack}}},
         {"threshold", Json{{"holds", th.holds}, {"max_violation", th.max_violation}}}};
  files.file(".csv", csv.str());
  files.file(".json", j.dump(2) + "\n");
  if (format_of(o, cfg) == "csv") out << csv.str();
  else out << j.dump(2) << '\n';
  return kOk;
}

// --- dual ------------------------------------------------------------------------------------

int run_dual(const Options& o, const ScenarioConfig& cfg, std::ostream& out) {
  const Output files(o, cfg, "dual");
  const Solution sol = solve_scenario(cfg);
  const auto c = conjugacy_check(sol.curve, cfg.prefs, cfg.run.x0);
  Json j{{"scenario", cfg.id}, {"x0", cfg.run.x0}, {"y0", c.y0}, {"primal_value", c.u},
         {"dual_value", c.dual_value}, {"u_minus_x0y0", c.rhs}, {"conjugacy_gap", c.relative_gap},
         {"passed", c.passed}};
  bool ok = c.passed;
  if (o.paths) {
    const TimeGrid grid{cfg.prefs.horizon(), cfg.run.n_steps};
    const auto src = PathSource::stream(cfg.market, grid, *o.paths, seed_of(o, cfg, "dual --paths"));
    const auto mc = dual_value_mc(cfg.prefs, optimal_strategy(sol.max.argmax, sol.curve), sol.curve, src, cfg.run.x0);
    j["monte_carlo"] = Json{{"estimate", mc.estimate}, {"se", mc.se}, {"holds", mc.holds}, {"n_paths", *o.paths}};
    ok = ok && mc.holds;
  }
  files.file(".json", j.dump(2) + "\n");
  out << j.dump(2) << '\n';
  return ok ? kOk : kVerdict;
}

// --- verify ----------------------------------------------------------------------------------

int run_verify(const Options& o, const ScenarioConfig& cfg, std::ostream& out) {
  const std::string test = o.test.empty() ? cfg.run.test : o.test;
  const Output files(o, cfg, "verify." + test);
  const std::uint64_t seed = seed_of(o, cfg, "verify");
  const Solution sol = solve_scenario(cfg);
  const TimeGrid grid{cfg.prefs.horizon(), cfg.run.n_steps};
  const auto src = PathSource::stream(cfg.market, grid, paths_of(o, cfg), seed);
  const Strategy opt = optimal_strategy(sol.max.argmax, sol.curve);
  const double x0 = cfg.run.x0;
  Json j{{"scenario", cfg.id}, {"test", test}, {"seed", seed}, {"n_paths", src.n_paths()}};
  std::ostringstream csv;
  csv.precision(17);
  bool passed = false;

  if (test == "primal") {
    PrimalTestOptions po;
    po.n_checkpoints = cfg.run.n_checkpoints;
    const auto r_opt = primal_martingale_test(cfg.prefs, opt, sol.curve, src, x0, po);
    Strategy pert = opt;
    pert.pi.array() += o.delta;
    po.control = opt;
    const auto r_pert = primal_martingale_test(cfg.prefs, pert, sol.curve, src, x0, po);
    j["optimal"] = martingale_json(r_opt);
    j["perturbed"] = martingale_json(r_pert);
    j["delta"] = o.delta;
    passed = r_opt.martingale() && r_pert.supermartingale();
    j["perturbed_strictly_decreasing"] = r_pert.strict_decrease();
    csv << "t,mean_optimal,se_optimal,mean_perturbed,se_perturbed\n";
    for (std::size_t k = 0; k < r_opt.checkpoints.size(); ++k)
      csv << r_opt.checkpoints[k] << ',' << r_opt.means[k] << ',' << r_opt.standard_errors[k] << ',' << r_pert.means[k]
          << ',' << r_pert.standard_errors[k] << '\n';
  } else if (test == "dual") {
    const auto r_opt = dual_supermartingale_test(cfg.prefs, opt, opt, sol.curve, src, x0, cfg.run.n_checkpoints);
    Strategy idle = opt;
    idle.pi.setZero();
    const auto r_idle = dual_supermartingale_test(cfg.prefs, idle, opt, sol.curve, src, x0, cfg.run.n_checkpoints);
    const auto dv = dual_value_mc(cfg.prefs, opt, sol.curve, src, x0);
    j["optimal"] = martingale_json(r_opt);
    j["no_trading"] = martingale_json(r_idle);
    j["dual_value"] = Json{{"estimate", dv.estimate}, {"se", dv.se}, {"exact", dv.exact}, {"holds", dv.holds}};
    passed = r_opt.martingale() && r_idle.supermartingale() && dv.holds;
    csv << "t,mean_optimal,se_optimal,mean_no_trading,se_no_trading\n";
    for (std::size_t k = 0; k < r_opt.checkpoints.size(); ++k)
      csv << r_opt.checkpoints[k] << ',' << r_opt.means[k] << ',' << r_opt.standard_errors[k] << ',' << r_idle.means[k]
          << ',' << r_idle.standard_errors[k] << '\n';
  } else if (test == "rhq" || test == "phi" || test == "dichotomy") {
    const auto Y = optimal_dual_paths(cfg.prefs, opt, sol.curve, src, x0);
    auto taus = checkpoint_indices(grid, cfg.run.n_checkpoints);
    taus.pop_back();
    if (test == "rhq") {
      const double q = o.q ? *o.q : cfg.run.q.value_or(cfg.prefs.q());
      std::optional<double> constant;
      const auto& m = cfg.market;
      if (m.dim() == 1 && m.effective_atoms().empty() && m.diffusion()(0, 0) > 0.0 && !cfg.constraints) {
        const double theta = m.drift()[0] / std::sqrt(m.diffusion()(0, 0));
        constant = minimal_measure_rhq_constant(ThetaModel{{0.0}, {theta}}, q, cfg.prefs);
      }
      const auto r = rhq_estimate(Y, q, cfg.prefs, taus, constant);
      j["rhq"] = rhq_json(r);
      passed = r.holds;
      csv << "tau,estimate,se\n";
      for (std::size_t k = 0; k < r.tau_grid.size(); ++k)
        csv << r.tau_grid[k] << ',' << r.estimates[k] << ',' << r.standard_errors[k] << '\n';
    } else if (test == "phi") {
      std::vector<double> qs;
      for (int k = 1; k <= 9; ++k) qs.push_back(0.1 * k);
      const auto r = phi_curve(Y, 0, grid.n_steps, qs);
      j["phi"] = Json{{"q", vec(r.q_grid)}, {"phi", vec(r.phi)}, {"se", vec(r.se)}, {"monotone", r.monotone}};
      if (r.limit) j["phi"]["limit"] = *r.limit;
      passed = r.monotone;
      csv << "q,phi,se\n";
      for (std::size_t k = 0; k < qs.size(); ++k) csv << qs[k] << ',' << r.phi[k] << ',' << r.se[k] << '\n';
    } else {
      const auto r = rhq_dichotomy(Y, {0.25, 0.5, 0.75}, cfg.prefs, taus);
      Json checks = Json::array();
      for (const auto& c : r.checks)
        checks.push_back(Json{{"q_from", c.q_from}, {"q_to", c.q_to}, {"transferred", c.transferred},
                              {"worst_margin_in_se", c.worst_margin}, {"holds", c.holds}});
      Json est = Json::array();
      for (const auto& e : r.estimates) est.push_back(rhq_json(e));
      j["estimates"] = est;
      j["checks"] = checks;
      passed = r.holds;
      csv << "q,tau,estimate,se\n";
      for (const auto& e : r.estimates)
        for (std::size_t k = 0; k < e.tau_grid.size(); ++k)
          csv << e.q << ',' << e.tau_grid[k] << ',' << e.estimates[k] << ',' << e.standard_errors[k] << '\n';
    }
  } else {
    throw Error(ErrorCode::Config, "verify --test must be primal, dual, rhq, phi or dichotomy");
  }
  j["passed"] = passed;
  files.file(".json", j.dump(2) + "\n");
  files.file(".csv", csv.str());
  if (format_of(o, cfg) == "csv") out << csv.str();
  else out << j.dump(2) << '\n';
  return passed ? kOk : kVerdict;
}

// --- experiment ------------------------------------------------------------------------------

int run_experiment_cmd(const Options& o, const ScenarioConfig& cfg, std::ostream& out) {
  const std::string tag = o.tag.empty() ? cfg.run.tag : o.tag;
  ScenarioConfig c = cfg;
  if (o.seed) c.run.seed = o.seed;
  const auto r = run_experiment(c, tag);
  if (o.timing) std::cerr << cfg.id << ' ' << tag << " runtime " << r.runtime_seconds << " s\n";
  const Output files(o, cfg, "experiment." + tag);
  const Json j = r.to_json();
  files.file(".json", j.dump(2) + "\n");
  if (format_of(o, cfg) == "csv") {
    out << "scenario,tag,passed,metric,value\n";
    out.precision(17);
    for (const auto& [k, v] : r.metrics) out << r.scenario << ',' << r.tag << ',' << r.passed << ',' << k << ',' << v << '\n';
  } else {
    out << j.dump(2) << '\n';
  }
  return r.passed ? kOk : kVerdict;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Opportunity-process solver and verifier for power utility in exponential Levy markets"};
  Options o;
  app.add_option("--config", o.config, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "Directory for JSON/CSV outputs");
  app.add_option("--seed", o.seed, "Seed for stochastic subcommands (overrides run.seed)");
  app.add_option("--format", o.format, "Stdout format")->check(CLI::IsMember({"json", "csv"}));
  app.add_flag("--timing", o.timing, "Print wall time of experiments to stderr");
  app.require_subcommand(0, 1);
  app.fallthrough();

  auto* solve = app.add_subcommand("solve", "Maximize g and build the opportunity curve");
  solve->add_option("--grid", o.grid_points, "Also write a CSV of g on this many points (dim 1)");
  auto* opportunity = app.add_subcommand("opportunity", "Opportunity curve with bound and threshold checks");
  auto* dual = app.add_subcommand("dual", "Dual value and conjugacy check");
  dual->add_option("--paths", o.paths, "Also estimate the dual value by Monte Carlo");
  auto* verify = app.add_subcommand("verify", "Monte Carlo verification");
  verify->add_option("--test", o.test, "primal|dual|rhq|phi|dichotomy")
      ->check(CLI::IsMember({"primal", "dual", "rhq", "phi", "dichotomy"}));
  verify->add_option("--paths", o.paths, "Number of paths");
  verify->add_option("--q", o.q, "Exponent for --test rhq (default p/(p-1))");
  verify->add_option("--delta", o.delta, "Shift of pi for the suboptimal strategy in --test primal");
  auto* experiment = app.add_subcommand("experiment", "Deterministic and Monte Carlo experiment suites");
  experiment->add_option("--tag", o.tag, "Experiment tag");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    const auto scenarios = load_scenarios(o.config);
    int worst = kOk;
    std::string sub;
    for (auto* s : {solve, opportunity, dual, verify, experiment})
      if (s->parsed()) sub = s->get_name();
    for (const auto& cfg : scenarios) {
      const std::string name = sub.empty() ? cfg.run.subcommand : sub;
      int code;
      if (name == "solve") code = run_solve(o, cfg, std::cout);
      else if (name == "opportunity") code = run_opportunity(o, cfg, std::cout);
      else if (name == "dual") code = run_dual(o, cfg, std::cout);
      else if (name == "verify") code = run_verify(o, cfg, std::cout);
      else if (name == "experiment") code = run_experiment_cmd(o, cfg, std::cout);
      else throw Error(ErrorCode::Config, "no subcommand given on the command line or in run.subcommand");
      worst = std::max(worst, code);
    }
    return worst;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}
