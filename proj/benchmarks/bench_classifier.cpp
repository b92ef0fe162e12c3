#include <vector>

#include <benchmark/benchmark.h>

#include "bench_data.hpp"
#include "newscls/classifier.hpp"

namespace newscls {
namespace {

LabelKind kind_arg(const benchmark::State& state) {
  return state.range(0) ? LabelKind::kMultilabel : LabelKind::kMulticlass;
}

void BM_LossAndGradient(benchmark::State& state) {
  const auto sp = bench::space(kind_arg(state), 14);
  const auto data = bench::dataset(sp, 8, 256);
  FeaturizerConfig cfg;
  std::vector<Example> batch;
  for (const auto& inst : data.instances()) batch.push_back(make_example(inst, sp, cfg));
  const LinearModel model(sp, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(model, batch));
}
BENCHMARK(BM_LossAndGradient)->ArgName("multilabel")->Arg(0)->Arg(1);

void BM_AdamStep(benchmark::State& state) {
  const auto sp = bench::space(LabelKind::kMultilabel, 14);
  const auto data = bench::dataset(sp, 4, 256);
  FeaturizerConfig cfg;
  std::vector<Example> batch;
  for (const auto& inst : data.instances()) batch.push_back(make_example(inst, sp, cfg));
  LinearModel model(sp, cfg);
  const auto grad = loss_and_gradient(model, batch).gradient;
  ModelAdam adam(model);
  const AdamConfig adam_cfg;
  for (auto _ : state) adam.step(model, grad, adam_cfg);
}
BENCHMARK(BM_AdamStep);

void BM_TrainEpoch(benchmark::State& state) {
  const auto sp = bench::space(kind_arg(state), 14);
  const auto data = bench::dataset(sp, 200, 128);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.max_seq_len = 128;
  FeaturizerConfig feat;
  feat.hash_dim = 1u << 16;
  for (auto _ : state) benchmark::DoNotOptimize(train(data, cfg, feat, 1));
  state.SetItemsProcessed(state.iterations() * data.size());
}
BENCHMARK(BM_TrainEpoch)->ArgName("multilabel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  const auto sp = bench::space(kind_arg(state), 14);
  const auto data = bench::dataset(sp, 100, 128);
  TrainConfig cfg;
  cfg.epochs = 2;
  FeaturizerConfig feat;
  feat.hash_dim = 1u << 16;
  const auto model = train(data, cfg, feat, 1);
  const auto doc = bench::text(256, 99);
  for (auto _ : state) benchmark::DoNotOptimize(predict_labels(model, doc));
}
BENCHMARK(BM_Predict)->ArgName("multilabel")->Arg(0)->Arg(1);

}  // namespace
}  // namespace newscls
