#include <benchmark/benchmark.h>

#include "structpop/config.hpp"
#include "structpop/pde.hpp"

using namespace structpop;

static void BM_PdeStep(benchmark::State& state) {
  ScenarioConfig cfg = preset_constant();
  cfg.grids.nx = static_cast<std::size_t>(state.range(0));
  const RateModel m = make_model(cfg);
  const Grids g = build_grids(m, cfg.grids);
  const PdeSolver pde(m, g);
  DensityState s = make_state(uniform_density(g, 1.0, 1.0), g);
  for (auto _ : state) {
    pde.step(s, Dynamics::kNonlinear);
    benchmark::DoNotOptimize(s.mass);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.trait.size() * g.age.nodes()));
}
BENCHMARK(BM_PdeStep)->Arg(16)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
