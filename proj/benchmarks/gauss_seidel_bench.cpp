#include <benchmark/benchmark.h>

#include "taskcomm/gauss_seidel.hpp"

using namespace taskcomm;
using namespace taskcomm::gs;

namespace {

void BM_Sweep(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Grid g = make_grid(n, n, 1);
  for (auto _ : state) {
    sweep(g);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_Sweep)->Arg(256)->Arg(1024);

void BM_Variant(benchmark::State& state) {
  VariantConfig c;
  c.variant = kAllVariants[state.range(0)];
  c.rows = c.cols = 256;
  c.block_rows = c.block_cols = static_cast<int>(state.range(1));
  c.ranks = 2;
  c.workers = c.variant == Variant::PureMPI || c.variant == Variant::NBuffer ? 1 : 2;
  c.iterations = 10;
  state.SetLabel(std::string(to_string(c.variant)));
  for (auto _ : state) benchmark::DoNotOptimize(run_variant(c).checksum);
  state.SetItemsProcessed(state.iterations() * c.iterations);
}
BENCHMARK(BM_Variant)
    ->ArgsProduct({{0, 1, 2, 3, 4, 5}, {32, 64}})
    ->Unit(benchmark::kMillisecond);

}  // namespace
