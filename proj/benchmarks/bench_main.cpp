// Micro-benchmarks for the hot paths: assembly, one splitting step,
// and the analytical series.

#include <benchmark/benchmark.h>

#include "fsl/biot.hpp"
#include "fsl/harness.hpp"
#include "fsl/mandel.hpp"

namespace {

void BM_AssembleElasticity(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const fsl::Mesh mesh = fsl::build_rectangle_mesh(1.0, 1.0, n, n);
  const fsl::FunctionSpace space(mesh, fsl::SpaceKind::P2Vector2);
  for (auto _ : state) {
    auto A = fsl::assemble_elasticity(space, 41.667e9, 27.778e9);
    benchmark::DoNotOptimize(A);
  }
  state.SetItemsProcessed(state.iterations() * mesh.triangles.size());
}
BENCHMARK(BM_AssembleElasticity)->Arg(8)->Arg(16)->Arg(32);

void BM_FixedStressStep(benchmark::State& state) {
  const fsl::CaseDefinition def =
      fsl::build_case(fsl::TestCase::UnitSquareSetup1, 1e-12);
  const fsl::BiotSolver solver(def.mesh, fsl::Disc::P2P1, def.problem);
  const double K_dr = 1.6 * def.mu + def.lambda;
  fsl::FixedStressConfig fs;
  fs.L = 1.0 / (1.5 * K_dr);
  const fsl::DiscreteState initial = solver.initial_state();
  for (auto _ : state) {
    auto [next, report] = solver.fixed_stress_step(initial, 1, fs);
    benchmark::DoNotOptimize(next);
    state.counters["iters"] = report.iterations;
  }
}
BENCHMARK(BM_FixedStressStep);

void BM_MonolithicStep(benchmark::State& state) {
  const fsl::CaseDefinition def =
      fsl::build_case(fsl::TestCase::UnitSquareSetup1, 1e-12);
  const fsl::BiotSolver solver(def.mesh, fsl::Disc::P2P1, def.problem);
  const fsl::DiscreteState initial = solver.initial_state();
  for (auto _ : state) {
    auto next = solver.monolithic_step(initial, 1);
    benchmark::DoNotOptimize(next);
  }
}
BENCHMARK(BM_MonolithicStep);

void BM_MandelSeries(benchmark::State& state) {
  const fsl::MandelParameters params;
  const fsl::RootSequence roots =
      fsl::mandel_roots(fsl::mandel_derived(params).c_slope, state.range(0));
  for (auto _ : state) {
    double acc = 0.0;
    for (int i = 0; i <= 20; ++i)
      acc += fsl::mandel_pressure(params, roots, params.a * i / 20.0, 25.0);
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BM_MandelSeries)->Arg(50)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
