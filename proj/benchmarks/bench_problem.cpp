#include <benchmark/benchmark.h>

#include "gdro/datagen.hpp"
#include "gdro/problem.hpp"

using namespace gdro;

namespace {

GroupedDataset desk_data() {
  SynthSpec spec;
  spec.kind = SynthSpec::Kind::gdro;
  spec.m = 10;
  spec.dim = 20;
  spec.n_per_group = {200};
  spec.seed = 1;
  return gen_gdro(spec);
}

void BM_FullGradient(benchmark::State& state) {
  GroupedDataset ds = desk_data();
  LossModel model = make_loss_model(ds);
  Geometry geom(20, 10, 1.0);
  Point z = init_point(geom);
  EvalCounter c;
  for (auto _ : state) {
    MergedGradient g = full_gradient(ds, model, z, c);
    benchmark::DoNotOptimize(g.gw.data());
  }
  state.SetItemsProcessed(state.iterations() * ds.total_samples());
}

void BM_GroupSamplingGradient(benchmark::State& state) {
  GroupedDataset ds = desk_data();
  LossModel model = make_loss_model(ds);
  Geometry geom(20, 10, 1.0);
  Point z = init_point(geom);
  EvalCounter c;
  SplitMix64 rng(3);
  for (auto _ : state) {
    GroupSample s = draw_group_sample(ds, rng);
    MergedGradient g = stochastic_gradient(ds, model, z, s, c);
    benchmark::DoNotOptimize(g.gw.data());
  }
  state.SetItemsProcessed(state.iterations() * ds.num_groups());
}

void BM_SingleIndexGradient(benchmark::State& state) {
  GroupedDataset ds = desk_data();
  LossModel model = make_loss_model(ds);
  Geometry geom(20, 10, 1.0);
  Point z = init_point(geom);
  EvalCounter c;
  SplitMix64 rng(4);
  for (auto _ : state) {
    auto [g, l] = mpvr_uniform_gradient(ds, model, z, rng, c);
    benchmark::DoNotOptimize(g.gw.data());
    benchmark::DoNotOptimize(l);
  }
}

}  // namespace

BENCHMARK(BM_FullGradient);
BENCHMARK(BM_GroupSamplingGradient);
BENCHMARK(BM_SingleIndexGradient);
