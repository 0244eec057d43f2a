#include <benchmark/benchmark.h>

#include "stickymfg/action_solver.hpp"
#include "stickymfg/calvo.hpp"
#include "stickymfg/jump_diffusion.hpp"
#include "stickymfg/mean_field.hpp"
#include "stickymfg/menu_cost.hpp"

using namespace stickymfg;

namespace {

ModelParams menu_params() {
  ModelParams p;
  p.theta = 0.0;
  return p;
}

void BM_StationaryVi(benchmark::State& state) {
  const ModelParams p = menu_params();
  const StateGrid g = menu_cost_grid(p, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_stationary_vi(p, 0.0, g));
}
BENCHMARK(BM_StationaryVi)->Arg(401)->Arg(801)->Arg(1601)->Unit(benchmark::kMillisecond);

void BM_TimeDependentVi(benchmark::State& state) {
  ModelParams p = menu_params();
  p.alpha = 0.5;
  const TimeGrid grid(5.0, static_cast<std::size_t>(state.range(0)));
  const AggregatePath agg = initial_guess(p, grid);
  const StateGrid g = menu_cost_grid(p, 801);
  for (auto _ : state) benchmark::DoNotOptimize(solve_time_dependent_vi(p, agg, g));
}
BENCHMARK(BM_TimeDependentVi)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_KernelStep(benchmark::State& state) {
  const ControlProblem lq = lq_problem(1.0, 0.5, 0.0, 1.0, 1.0);
  const WaveGrid w = terminal_wave(lq, StateGrid::symmetric(4.0, static_cast<std::size_t>(state.range(0))), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(propagate_kernel(w, lq, 0.0, 0.005));
}
BENCHMARK(BM_KernelStep)->Arg(401)->Arg(801)->Unit(benchmark::kMicrosecond);

void BM_SolveFoc(benchmark::State& state) {
  const ControlProblem lq = lq_problem(1.0, 0.5, 0.0, 1.0, 0.01);
  const TimeGrid grid(1.0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_foc(lq, grid, 0.01));
}
BENCHMARK(BM_SolveFoc)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_CalvoMonteCarlo(benchmark::State& state) {
  ModelParams p;
  const TimeGrid grid(10.0, 400);
  SimulationOptions o;
  o.n_paths = static_cast<std::size_t>(state.range(0));
  o.reset_rule = [](double, double) { return 0.0; };
  for (auto _ : state) benchmark::DoNotOptimize(simulate_markup_moments(p, grid, o));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CalvoMonteCarlo)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_BandMonteCarlo(benchmark::State& state) {
  const ModelParams p = menu_params();
  const PolicyBand band = solve_stationary_vi(p, 0.0, menu_cost_grid(p, 801)).band;
  const TimeGrid grid(5.0, 400);
  SimulationOptions o;
  o.n_paths = static_cast<std::size_t>(state.range(0));
  o.band = [&band](double s) { return band.at(s); };
  for (auto _ : state) benchmark::DoNotOptimize(simulate_markup_moments(p, grid, o));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BandMonteCarlo)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_CalvoEquilibrium(benchmark::State& state) {
  ModelParams p;
  p.alpha = 0.5;
  const TimeGrid grid(10.0, 400);
  EquilibriumSettings s;
  s.tol = 1e-8;
  for (auto _ : state) benchmark::DoNotOptimize(solve_equilibrium(p, grid, s));
}
BENCHMARK(BM_CalvoEquilibrium)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
