#include <benchmark/benchmark.h>

#include "gdro/geometry.hpp"
#include "gdro/rng.hpp"

using namespace gdro;

namespace {

Point random_point(const Geometry& geom, SplitMix64& rng) {
  Point z = init_point(geom);
  for (int d = 0; d < geom.dim; ++d) z.w[d] = 0.1 * rng.next_gaussian();
  double n = z.w.norm();
  if (n > geom.radius) z.w *= geom.radius / n;
  return z;
}

void BM_ProxStep(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const int m = static_cast<int>(state.range(1));
  Geometry geom(dim, m, 1.0);
  SplitMix64 rng(1);
  Point cur = random_point(geom, rng);
  DualPoint anchor = dual_map(geom, cur);
  MergedGradient g;
  g.gw.resize(dim);
  g.gq.resize(m);
  for (int i = 0; i < dim; ++i) g.gw[i] = rng.next_gaussian();
  for (int i = 0; i < m; ++i) g.gq[i] = rng.next_gaussian();
  for (auto _ : state) {
    Point out = prox_step(geom, g, 0.01, 0.1, anchor, cur);
    benchmark::DoNotOptimize(out.w.data());
  }
}

void BM_Bregman(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  const int m = static_cast<int>(state.range(1));
  Geometry geom(dim, m, 1.0);
  SplitMix64 rng(2);
  Point a = random_point(geom, rng);
  Point b = random_point(geom, rng);
  BregmanAnchor anchor = make_anchor(geom, b);
  for (auto _ : state) {
    double v = bregman(geom, a, anchor);
    benchmark::DoNotOptimize(v);
  }
}

}  // namespace

BENCHMARK(BM_ProxStep)->Args({20, 10})->Args({1024, 25});
BENCHMARK(BM_Bregman)->Args({20, 10})->Args({1024, 25});
