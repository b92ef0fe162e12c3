#include <map>

#include <benchmark/benchmark.h>

#include "bench_data.hpp"
#include "newscls/augment.hpp"

namespace newscls {
namespace {

void BM_AugmentDataset(benchmark::State& state) {
  const auto sp = bench::space(LabelKind::kMultilabel, 14);
  const auto data = bench::dataset(sp, 200, 128);
  std::map<std::string, std::vector<std::string>> entries;
  for (int i = 0; i < 500; i += 3) {
    entries["w" + std::to_string(i)] = {"s" + std::to_string(i)};
  }
  const SynonymLexicon lexicon(entries);
  AugmentPlan plan;
  plan.ops = {AugmentOp::kSynonymReplace, AugmentOp::kRandomInsert,
              AugmentOp::kRandomSwap, AugmentOp::kRandomDelete};
  plan.rate = 0.1;
  plan.seed = 3;
  const auto jobs = static_cast<unsigned>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(augment_dataset(data, plan, &lexicon, nullptr, jobs));
  }
  state.SetItemsProcessed(state.iterations() * data.size());
}
BENCHMARK(BM_AugmentDataset)->ArgName("jobs")->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace newscls
