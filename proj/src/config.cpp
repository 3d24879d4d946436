#include "opproc/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "opproc/errors.hpp"

namespace opproc {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::Config, msg); }

void only_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key())) fail("unknown key '" + it.key() + "' in " + where);
}

double number(const Json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  fail(where + " must be a number");
}

Vector vector_of(const Json& v, const std::string& where) {
  if (v.is_number() || v.is_string()) {
    Vector out(1);
    out[0] = number(v, where);
    return out;
  }
  if (!v.is_array() || v.empty()) fail(where + " must be a number or a nonempty array");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = number(v[i], where);
  return out;
}

Matrix matrix_of(const Json& v, int dim, const std::string& where) {
  if (v.is_number()) {
    if (dim != 1) fail(where + " must be a matrix when dim > 1");
    return Matrix::Constant(1, 1, v.get<double>());
  }
  if (!v.is_array() || static_cast<int>(v.size()) != dim) fail(where + " must be a dim x dim array");
  Matrix m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const Json& row = v[static_cast<std::size_t>(i)];
    if (dim == 1 && row.is_number()) {
      m(0, 0) = row.get<double>();
      continue;
    }
    if (!row.is_array() || static_cast<int>(row.size()) != dim) fail(where + " must be a dim x dim array");
    for (int j = 0; j < dim; ++j) m(i, j) = number(row[static_cast<std::size_t>(j)], where);
  }
  return m;
}

std::vector<double> list_of(const Json& v, const std::string& where) {
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) fail(where + " must be an array");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(number(x, where));
  return out;
}

JumpDensity density_of(const Json& v) {
  only_keys(v, "market.jump_density", {"kind", "lo", "hi", "intensity", "exponent", "scale", "nodes"});
  const std::string kind = v.value("kind", "");
  JumpDensity d;
  d.nodes = v.value("nodes", 64);
  if (kind == "uniform") {
    d.lo = number(v.at("lo"), "jump_density.lo");
    d.hi = number(v.at("hi"), "jump_density.hi");
    if (!(d.hi > d.lo)) fail("uniform jump density needs lo < hi");
    const double rate = v.value("intensity", 1.0) / (d.hi - d.lo);
    d.density = [rate](double) { return rate; };
    d.label = "uniform";
  } else if (kind == "pareto") {
    d.lo = number(v.at("lo"), "jump_density.lo");
    d.hi = v.contains("hi") ? number(v["hi"], "jump_density.hi") : std::numeric_limits<double>::infinity();
    const double a = v.value("exponent", 2.0);
    const double s = v.value("scale", 1.0);
    d.density = [a, s](double x) { return s * std::pow(std::abs(x), -a); };
    d.label = "pareto";
  } else {
    fail("jump_density.kind must be 'uniform' or 'pareto'");
  }
  return d;
}

ConsumptionMode mode_of(const std::string& s) {
  if (s == "WithConsumption") return ConsumptionMode::WithConsumption;
  if (s == "TerminalOnly") return ConsumptionMode::TerminalOnly;
  fail("preferences.mode must be 'WithConsumption' or 'TerminalOnly'");
}

std::string format_value(const Json& v) {
  if (v.is_number()) {
    std::ostringstream os;
    os << v.get<double>();
    return os.str();
  }
  return v.dump();
}

}  // namespace

ScenarioConfig parse_scenario(const Json& doc, const std::string& id) {
  only_keys(doc, "config", {"id", "market", "preferences", "run"});
  if (!doc.contains("market")) fail("config needs a market section");
  const Json& m = doc["market"];
  only_keys(m, "market", {"drift", "diffusion", "jump_atoms", "jump_density", "constraints"});
  if (!doc.contains("preferences")) fail("config needs a preferences section");
  const Json& pr = doc["preferences"];
  only_keys(pr, "preferences", {"p", "T", "mode", "discount_breakpoints", "discount_values"});
  const Json run_doc = doc.contains("run") ? doc["run"] : Json::object();
  only_keys(run_doc, "run",
            {"subcommand", "n_steps", "n_paths", "seed", "x0", "n_checkpoints", "out", "format", "test", "q", "tag",
             "experiment", "sweep"});

  if (!pr.contains("p")) fail("preferences.p is required");
  const double T = pr.contains("T") ? number(pr["T"], "preferences.T") : 1.0;
  if (!(T > 0.0) || !std::isfinite(T)) fail("preferences.T must be positive");
  const ConsumptionMode mode = mode_of(pr.value("mode", std::string("WithConsumption")));
  PiecewiseDiscount discount = PiecewiseDiscount::constant(T);
  if (pr.contains("discount_breakpoints") || pr.contains("discount_values")) {
    if (!pr.contains("discount_breakpoints") || !pr.contains("discount_values"))
      fail("discount_breakpoints and discount_values go together");
    discount = PiecewiseDiscount::create(T, list_of(pr["discount_breakpoints"], "discount_breakpoints"),
                                         list_of(pr["discount_values"], "discount_values"));
  }
  Preferences prefs = Preferences::create(number(pr["p"], "preferences.p"), discount, mode);

  if (!m.contains("drift")) fail("market.drift is required");
  Vector drift = vector_of(m["drift"], "market.drift");
  const int dim = static_cast<int>(drift.size());
  Matrix diffusion = m.contains("diffusion") ? matrix_of(m["diffusion"], dim, "market.diffusion") : Matrix::Zero(dim, dim);
  JumpMeasure jumps;
  if (m.contains("jump_atoms")) {
    if (!m["jump_atoms"].is_array()) fail("market.jump_atoms must be an array");
    for (const auto& a : m["jump_atoms"]) {
      only_keys(a, "market.jump_atoms[]", {"size", "intensity"});
      if (!a.contains("size") || !a.contains("intensity")) fail("jump atoms need size and intensity");
      jumps.atoms.push_back({vector_of(a["size"], "jump_atoms.size"), number(a["intensity"], "jump_atoms.intensity")});
    }
  }
  if (m.contains("jump_density")) jumps.density = density_of(m["jump_density"]);
  LevyMarket market = LevyMarket::create(drift, diffusion, jumps, T);

  std::optional<ConstraintSet> constraints;
  if (m.contains("constraints")) {
    const Json& c = m["constraints"];
    only_keys(c, "market.constraints", {"lower", "upper"});
    Vector lo = c.contains("lower") ? vector_of(c["lower"], "constraints.lower")
                                    : Vector::Constant(dim, -std::numeric_limits<double>::infinity());
    Vector hi = c.contains("upper") ? vector_of(c["upper"], "constraints.upper")
                                    : Vector::Constant(dim, std::numeric_limits<double>::infinity());
    if (lo.size() != dim || hi.size() != dim) fail("constraint bounds must have the market dimension");
    constraints = ConstraintSet::box(lo, hi);
  }

  RunSection run;
  run.subcommand = run_doc.value("subcommand", "");
  run.n_steps = run_doc.value("n_steps", run.n_steps);
  if (run.n_steps < 1) fail("run.n_steps must be >= 1");
  if (run_doc.contains("n_paths")) {
    const auto n = run_doc["n_paths"].get<long long>();
    if (n < 1) fail("run.n_paths must be >= 1");
    run.n_paths = static_cast<std::size_t>(n);
  }
  if (run_doc.contains("seed")) {
    if (!run_doc["seed"].is_number_integer() || run_doc["seed"].get<long long>() < 0)
      fail("run.seed must be a nonnegative integer");
    run.seed = run_doc["seed"].get<std::uint64_t>();
  }
  run.x0 = run_doc.value("x0", run.x0);
  if (!(run.x0 > 0.0)) fail("run.x0 must be positive");
  run.n_checkpoints = run_doc.value("n_checkpoints", run.n_checkpoints);
  run.out = run_doc.value("out", "");
  run.format = run_doc.value("format", "json");
  if (run.format != "json" && run.format != "csv") fail("run.format must be json or csv");
  run.test = run_doc.value("test", "");
  if (run_doc.contains("q")) run.q = number(run_doc["q"], "run.q");
  run.tag = run_doc.value("tag", "");
  if (run_doc.contains("experiment")) {
    if (!run_doc["experiment"].is_object()) fail("run.experiment must be an object");
    run.experiment = run_doc["experiment"];
  }

  return ScenarioConfig{doc.value("id", id), std::move(market), std::move(constraints), std::move(prefs),
                        std::move(run), doc};
}

std::vector<std::pair<std::string, Json>> expand_sweeps(const Json& doc, const std::string& base_id) {
  const std::string id = doc.is_object() && doc.contains("id") && doc["id"].is_string() ? doc["id"].get<std::string>() : base_id;
  if (!doc.is_object() || !doc.contains("run") || !doc["run"].is_object() || !doc["run"].contains("sweep"))
    return {{id, doc}};
  const Json sweep = doc["run"]["sweep"];
  if (!sweep.is_object()) fail("run.sweep must be an object of lists");
  Json base = doc;
  base["run"].erase("sweep");

  // nlohmann objects iterate in key order
  std::vector<std::pair<std::string, Json>> axes;
  for (auto it = sweep.begin(); it != sweep.end(); ++it) {
    if (!it.value().is_array() || it.value().empty()) fail("sweep '" + it.key() + "' must be a nonempty list");
    for (const auto& v : it.value())
      if (!(v.is_number() || v.is_string() || v.is_boolean())) fail("sweep '" + it.key() + "' must list scalars");
    const auto dot = it.key().find('.');
    if (dot == std::string::npos) fail("sweep key '" + it.key() + "' must be section.key");
    axes.emplace_back(it.key(), it.value());
  }

  std::vector<std::pair<std::string, Json>> out;
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    Json d = base;
    std::string label;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& key = axes[a].first;
      const auto dot = key.find('.');
      const std::string section = key.substr(0, dot);
      const std::string field = key.substr(dot + 1);
      const Json& v = axes[a].second[idx[a]];
      if (!d.contains(section)) d[section] = Json::object();
      Json& slot = d[section][field];
      if (slot.is_array() && slot.size() == 1 && v.is_number()) slot = Json::array({v});
      else slot = v;
      label += (a ? "," : "") + key + "=" + format_value(v);
    }
    d["id"] = id + "[" + label + "]";
    out.emplace_back(d["id"].get<std::string>(), d);
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].second.size()) break;
      idx[a] = 0;
      if (a == 0) return out;
    }
    if (axes.empty()) return out;
  }
}

std::vector<ScenarioConfig> load_scenarios(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file " + path);
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail(std::string("config is not valid JSON: ") + e.what());
  }
  std::string base = path;
  if (auto slash = base.find_last_of('/'); slash != std::string::npos) base = base.substr(slash + 1);
  if (auto dot = base.find_last_of('.'); dot != std::string::npos) base = base.substr(0, dot);
  std::vector<ScenarioConfig> out;
  for (auto& [id, d] : expand_sweeps(doc, base)) out.push_back(parse_scenario(d, id));
  return out;
}

std::uint64_t require_seed(const RunSection& run, const std::string& what) {
  if (!run.seed) fail(what + " is stochastic and needs a seed (run.seed or --seed)");
  return *run.seed;
}

}  // namespace opproc
