#include <benchmark/benchmark.h>

#include "gdro/datagen.hpp"
#include "gdro/solvers.hpp"

using namespace gdro;

namespace {

GroupedDataset small_data() {
  SynthSpec spec;
  spec.kind = SynthSpec::Kind::gdro;
  spec.m = 5;
  spec.dim = 10;
  spec.n_per_group = {50};
  spec.seed = 2;
  return gen_gdro(spec);
}

void BM_AlegEpoch(benchmark::State& state) {
  GroupedDataset ds = small_data();
  LossModel model = make_loss_model(ds);
  Geometry geom(10, 5, 1.0);
  AlegConfig cfg;
  cfg.epochs = 1;
  cfg.inner = 50;
  for (auto _ : state) {
    RunRecord rec = aleg(ds, model, geom, cfg, 0);
    benchmark::DoNotOptimize(rec.solution.w.data());
  }
  state.SetItemsProcessed(state.iterations() * aleg_epoch_cost(ds, 50));
}

void BM_MpvrEpoch(benchmark::State& state) {
  GroupedDataset ds = small_data();
  LossModel model = make_loss_model(ds);
  Geometry geom(10, 5, 1.0);
  MpvrConfig cfg;
  cfg.epochs = 1;
  cfg.inner = 250;
  for (auto _ : state) {
    RunRecord rec = mpvr(ds, model, geom, cfg, 0);
    benchmark::DoNotOptimize(rec.solution.w.data());
  }
  state.SetItemsProcessed(state.iterations() * mpvr_epoch_cost(ds, 250));
}

void BM_SmdSteps(benchmark::State& state) {
  GroupedDataset ds = small_data();
  LossModel model = make_loss_model(ds);
  Geometry geom(10, 5, 1.0);
  for (auto _ : state) {
    RunRecord rec = smd(ds, model, geom, 100, 0.0, 1, 0);
    benchmark::DoNotOptimize(rec.solution.w.data());
  }
  state.SetItemsProcessed(state.iterations() * 100 * ds.num_groups());
}

}  // namespace

BENCHMARK(BM_AlegEpoch);
BENCHMARK(BM_MpvrEpoch);
BENCHMARK(BM_SmdSteps);

BENCHMARK_MAIN();
