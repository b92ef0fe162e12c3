#include <benchmark/benchmark.h>

#include "bench_data.hpp"
#include "newscls/metrics.hpp"

namespace newscls {
namespace {

void BM_ScoreMultilabel(benchmark::State& state) {
  const auto sp = bench::space(LabelKind::kMultilabel, 23);
  const auto gold = bench::random_labels(sp, state.range(0), 1);
  const auto pred = bench::random_labels(sp, state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(score(gold, pred, sp));
  state.SetItemsProcessed(state.iterations() * gold.size());
}
BENCHMARK(BM_ScoreMultilabel)->Arg(100)->Arg(10000);

void BM_ScoreMulticlass(benchmark::State& state) {
  const auto sp = bench::space(LabelKind::kMulticlass, 3);
  const auto gold = bench::random_labels(sp, state.range(0), 1);
  const auto pred = bench::random_labels(sp, state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(score(gold, pred, sp));
  state.SetItemsProcessed(state.iterations() * gold.size());
}
BENCHMARK(BM_ScoreMulticlass)->Arg(100)->Arg(10000);

void BM_OracleScore(benchmark::State& state) {
  const auto sp = bench::space(LabelKind::kMultilabel, 23);
  const auto gold = bench::random_labels(sp, state.range(0), 1);
  const auto pred = bench::random_labels(sp, state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(oracle_score(gold, pred, sp));
}
BENCHMARK(BM_OracleScore)->Arg(100)->Arg(1000);

}  // namespace
}  // namespace newscls
