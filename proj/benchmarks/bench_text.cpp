#include <benchmark/benchmark.h>

#include "bench_data.hpp"
#include "newscls/text.hpp"

namespace newscls {
namespace {

void BM_Tokenize(benchmark::State& state) {
  const auto doc = bench::text(state.range(0), 1);
  const FeaturizerConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(tokenize(doc, cfg));
  state.SetBytesProcessed(state.iterations() * doc.size());
}
BENCHMARK(BM_Tokenize)->Arg(64)->Arg(512);

void BM_FeaturizeText(benchmark::State& state) {
  const auto doc = bench::text(state.range(0), 1);
  FeaturizerConfig cfg;
  cfg.max_tokens = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(featurize_text(doc, cfg));
  state.SetBytesProcessed(state.iterations() * doc.size());
}
BENCHMARK(BM_FeaturizeText)->Arg(64)->Arg(256)->Arg(512);

}  // namespace
}  // namespace newscls
