// Serial reference vs OpenMP kernels. Arg(0) = Serial, Arg(1) = Parallel.
#include <benchmark/benchmark.h>

#include "opproc/montecarlo.hpp"
#include "opproc/objective.hpp"

using namespace opproc;

namespace {

Execution exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
}

LevyMarket jump_market() {
  JumpMeasure jumps;
  jumps.atoms.push_back({Vector::Constant(1, -0.2), 0.5});
  jumps.atoms.push_back({Vector::Constant(1, 0.1), 0.5});
  return LevyMarket::create(Vector::Constant(1, 0.05), Matrix::Constant(1, 1, 0.04), jumps, 1.0);
}

struct Setup {
  LevyMarket market = jump_market();
  Preferences prefs = Preferences::create(0.5, PiecewiseDiscount::constant(1.0));
  TimeGrid grid{1.0, 200};
  MaximizerResult best = g_max(GFunction::make(market, prefs));
  OpportunityCurve curve = L_closed_form(a_param(best.value, 0.5), 0.5, grid);
  Strategy optimal = optimal_strategy(best.argmax, curve);
};

void BM_simulate_returns(benchmark::State& state) {
  Setup s;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_returns(s.market, s.grid, 20000, 1, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * 20000);
}

void BM_primal_martingale_test(benchmark::State& state) {
  Setup s;
  auto paths = PathSource::stream(s.market, s.grid, 20000, 1);
  PrimalTestOptions opts;
  opts.exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(primal_martingale_test(s.prefs, s.optimal, s.curve, paths, 1.0, opts));
  state.SetItemsProcessed(state.iterations() * 20000);
}

void BM_optimal_dual_paths(benchmark::State& state) {
  Setup s;
  auto paths = PathSource::stream(s.market, s.grid, 20000, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(optimal_dual_paths(s.prefs, s.optimal, s.curve, paths, 1.0, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * 20000);
}

void BM_g_grid_scan(benchmark::State& state) {
  Setup s;
  auto f = GFunction::make(s.market, s.prefs);
  for (auto _ : state) benchmark::DoNotOptimize(g_grid_scan(f, f.domain.lower[0], f.domain.upper[0], 1000000, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * 1000000);
}

}  // namespace

BENCHMARK(BM_simulate_returns)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_primal_martingale_test)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_optimal_dual_paths)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_g_grid_scan)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
