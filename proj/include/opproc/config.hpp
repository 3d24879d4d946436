#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "opproc/constraints.hpp"
#include "opproc/market.hpp"
#include "opproc/preferences.hpp"

namespace opproc {

using Json = nlohmann::json;

struct RunSection {
  std::string subcommand;
  int n_steps = 1000;
  std::size_t n_paths = 10000;
  std::optional<std::uint64_t> seed;
  double x0 = 1.0;
  int n_checkpoints = 10;
  std::string out;
  std::string format = "json";
  std::string test;
  std::optional<double> q;
  std::string tag;
  /// Tag-specific parameters, checked by run_experiment.
  Json experiment = Json::object();
};

/// One fully parsed scenario:
///   { "id": ..., "market": {...}, "preferences": {...}, "run": {...} }
/// market:      drift, diffusion, jump_atoms [{size, intensity}], jump_density, constraints {lower, upper}
/// preferences: p, T, mode, discount_breakpoints, discount_values
/// run:         subcommand, n_steps, n_paths, seed, x0, n_checkpoints, out, format, test, q, tag,
///              experiment {...}, sweep {"section.key": [values...]}
/// Unknown keys anywhere raise Config.
struct ScenarioConfig {
  std::string id;
  LevyMarket market;
  std::optional<ConstraintSet> constraints;
  Preferences prefs;
  RunSection run;
  Json source;
};

ScenarioConfig parse_scenario(const Json& doc, const std::string& id = "scenario");

/// Expands run.sweep into the cartesian product of its lists, keys in lexicographic order with
/// the first key varying slowest. Without a sweep the document is returned as is.
std::vector<std::pair<std::string, Json>> expand_sweeps(const Json& doc, const std::string& base_id);

/// Reads a file, expands sweeps and parses each scenario.
std::vector<ScenarioConfig> load_scenarios(const std::string& path);

/// Throws Config unless a seed is present.
std::uint64_t require_seed(const RunSection& run, const std::string& what);

}  // namespace opproc
