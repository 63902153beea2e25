#include <benchmark/benchmark.h>

#include "structpop/config.hpp"
#include "structpop/malthus.hpp"

using namespace structpop;

static void BM_Perron(benchmark::State& state) {
  ScenarioConfig cfg = preset_singular();
  cfg.grids.nx = static_cast<std::size_t>(state.range(0));
  const RateModel m = make_model(cfg);
  const Grids g = build_grids(m, cfg.grids);
  const DiscreteOperator op =
      assemble(collapse(m, g, 2.0), g.trait, OperatorKind::kDirect);
  for (auto _ : state) benchmark::DoNotOptimize(perron(op).rho);
}
BENCHMARK(BM_Perron)->Arg(64)->Arg(256)->Arg(800)->Unit(benchmark::kMillisecond);

static void BM_LambdaStar(benchmark::State& state) {
  ScenarioConfig cfg = preset_constant();
  cfg.grids.nx = static_cast<std::size_t>(state.range(0));
  const RateModel m = make_model(cfg);
  const Grids g = build_grids(m, cfg.grids);
  for (auto _ : state) {
    MalthusSolver s(m, g);
    benchmark::DoNotOptimize(s.find_lambda_star().lambda_star);
  }
}
BENCHMARK(BM_LambdaStar)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
