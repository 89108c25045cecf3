// Serial reference vs OpenMP path for the batch kernels.
// Arg 0 selects Exec::serial, 1 Exec::parallel.

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "intraday/backtest.hpp"
#include "intraday/ingest.hpp"
#include "intraday/lob_core.hpp"
#include "intraday/optimizer.hpp"
#include "intraday/pipeline.hpp"

using namespace intraday;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::parallel; }

const std::vector<ProductEvents>& products() {
  static const auto data = [] {
    SynthConfig synth;
    synth.seed = 7;
    DatasetSpec spec{std::chrono::year{2019} / 1 / 1, 16, {14}};
    std::vector<ProductEvents> out;
    for (auto t : delivery_times(spec)) out.push_back(synth_product(synth, t, 300));
    return out;
  }();
  return data;
}

const std::vector<BucketGrid>& grids() {
  static const auto data = aggregate_batch(products(), VolumeBucketScheme::standard(), Exec::serial);
  return data;
}

// Smooth stand-in surface so the cost kernels do not depend on a fitted model.
class ToySurface final : public ImpactSurface {
 public:
  ImpactEstimate evaluate(ImpactKind kind, double n, int k, int horizon, const TimeMeta&) const override {
    if (n == 0.0) return {0.0, 0.0};
    const double late = static_cast<double>(k) / horizon;
    const double scale = kind == ImpactKind::temporary ? 0.02 : 0.005;
    return {scale * (1.0 + late) * std::sqrt(n), 0.5 * scale * std::sqrt(n)};
  }
};

const ToySurface kToy;

CostModelParams toy_params() { return {47.22, bucket_volatility(20.57), 2e-5, &kToy}; }

void BM_AggregateBatch(benchmark::State& state) {
  for (auto _ : state) {
    auto g = aggregate_batch(products(), VolumeBucketScheme::standard(), exec_of(state));
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_AggregateBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_CostTable(benchmark::State& state) {
  const auto params = toy_params();
  for (auto _ : state) {
    CostTable table(270, 3000, params, {}, exec_of(state));
    benchmark::DoNotOptimize(table);
  }
}
BENCHMARK(BM_CostTable)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Optimize(benchmark::State& state) {
  const auto params = toy_params();
  GaConfig ga;
  ga.population_size = 100;
  ga.max_stall_iterations = 50;
  ga.max_generations = 200;
  for (auto _ : state) {
    auto r = optimize(300.0, 60, Side::buy, params, ga, {}, {}, exec_of(state));
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_Optimize)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Backtest(benchmark::State& state) {
  std::vector<ScenarioPlan> plans;
  for (double x : {100.0, 300.0}) {
    Scenario s{x, 300, Side::buy};
    plans.push_back({s, {{"TWAP", twap(x, s.buckets(), Side::buy)}, {"IOBE", iobe(x, s.buckets(), Side::buy)}},
                     {{"TWAP", "IOBE"}}});
  }
  for (auto _ : state) {
    auto r = run_backtest(grids(), plans, {}, exec_of(state));
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_Backtest)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
