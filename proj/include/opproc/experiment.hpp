#pragma once

#include <string>
#include <utility>
#include <vector>

#include "opproc/config.hpp"
#include "opproc/objective.hpp"
#include "opproc/opportunity.hpp"

namespace opproc {

/// Closed form when D is constant 1 (either mode), ODE otherwise.
OpportunityCurve build_curve(double gbar, const Preferences& prefs, const TimeGrid& grid);

struct Solution {
  ValidationReport validation;
  MaximizerResult max;
  OpportunityCurve curve;
};

/// validate_market, then g_max over constraint_set(market, user), then the opportunity curve.
/// Throws Error(InvalidArgument) on a failed validation and Error(UnboundedAbove) when g_max
/// reports it.
Solution solve_scenario(const ScenarioConfig& cfg);

struct ExperimentReport {
  std::string scenario;
  std::string tag;
  std::string property;
  bool passed = false;
  std::vector<std::pair<std::string, double>> metrics;
  /// Wall time; kept out of to_json so reports are byte-reproducible.
  double runtime_seconds = 0.0;

  Json to_json() const;
};

const std::vector<std::string>& experiment_tags();

/// Tags: constraint_monotonicity, threshold, tax_window, rhq_dichotomy, kappa_lower_bound.
/// Throws UnknownTag otherwise; tag-specific keys live in run.experiment.
ExperimentReport run_experiment(const ScenarioConfig& cfg, const std::string& tag);

}  // namespace opproc
