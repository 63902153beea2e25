#include <benchmark/benchmark.h>

#include "structpop/config.hpp"
#include "structpop/ibm.hpp"

using namespace structpop;

static void BM_IbmRun(benchmark::State& state) {
  const ScenarioConfig cfg = preset_constant();
  const RateModel m = make_model(cfg);
  const Grids g = build_grids(m, cfg.grids);
  const IbmSimulator sim(m, g.trait);
  const AgeTraitField n0 = uniform_density(g, 1.0, 1.0);
  const double scale = static_cast<double>(state.range(0));
  std::uint64_t seed = 1;
  std::size_t events = 0;
  for (auto _ : state) {
    IbmOptions o;
    o.tmax = 2.0;
    o.seed = seed++;
    const EventLog log = simulate_nonlinear(sim, sample_population(n0, g, scale, o.seed), o);
    events += log.births + log.deaths + log.phantoms;
    benchmark::DoNotOptimize(log.final_population.count());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(events));
}
BENCHMARK(BM_IbmRun)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
