#include <benchmark/benchmark.h>

#include "dummf/forecaster.hpp"
#include "dummf/losses.hpp"
#include "dummf/metrics.hpp"
#include "dummf/synth.hpp"
#include "dummf/trainer.hpp"

using namespace dummf;

namespace {

Scene bench_scene(std::size_t persons, std::uint64_t seed = 11) {
  SyntheticSpec s;
  s.scene_count = 1;
  s.persons = persons;
  s.history_len = 45;
  s.future_len = 15;
  s.branches = 2;
  return synthetic_dataset(s, seed).front();
}

TrainConfig bench_config() {
  TrainConfig c;
  c.batch_size = 8;
  c.M = 5;
  c.rng_seed = 1;
  c.predictor.layers = 1;
  c.predictor.d_model = 32;
  c.predictor.code_dim = 32;
  c.predictor.heads = 4;
  c.predictor.ff_dim = 64;
  c.discriminator = {1, 32, 4, 64};
  return c;
}

}  // namespace

static void BM_ForecastWindow(benchmark::State& state) {
  const auto persons = static_cast<std::size_t>(state.range(0));
  const Scene scene = bench_scene(persons);
  const ForecastModel model = forecast_model(init_train_state(bench_config()));
  std::uint64_t k = 0;
  for (auto _ : state) {
    Rng rng = Rng::stream(3, k++);
    benchmark::DoNotOptimize(forecast_window(scene.histories(), model, 5, rng));
  }
}
BENCHMARK(BM_ForecastWindow)->Arg(1)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

static void BM_GeneratorObjective(benchmark::State& state) {
  TrainConfig cfg = bench_config();
  SyntheticSpec s;
  s.scene_count = 16;
  s.persons = 3;
  const TrainingData data = prepare_training_data(synthetic_dataset(s, 2), cfg);
  TrainState st = init_train_state(cfg);
  Rng rng(9);
  const auto batch = sample_batch(data, cfg, rng);
  for (auto _ : state) {
    auto obj = generator_objective(st, data, batch);
    backward(obj.total);
    benchmark::DoNotOptimize(obj.total.item());
  }
}
BENCHMARK(BM_GeneratorObjective)->Unit(benchmark::kMillisecond);

static void BM_Metrics(benchmark::State& state) {
  const Scene scene = bench_scene(3);
  Candidates pred;
  for (std::int64_t m = 0; m < state.range(0); ++m) pred.push_back(bench_scene(3, 100 + m).futures());
  const auto gt = scene.futures();
  const auto hist = scene.histories();
  const auto& skel = SkeletonSpec::canonical();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_candidates(pred, gt, hist, skel));
}
BENCHMARK(BM_Metrics)->Arg(5)->Arg(20);

static void BM_Diversity(benchmark::State& state) {
  const auto M = static_cast<std::size_t>(state.range(0));
  const SlotLayout L{8, M, 3};
  Rng rng(4);
  std::vector<double> v(L.slots() * 15 * 45);
  for (auto& x : v) x = rng.normal();
  const Tensor pred = Tensor::from({L.slots(), 15 * 45}, v, true);
  for (auto _ : state) {
    Tensor loss = loss_diversity(pred, L, 15, SkeletonSpec::canonical(), 50, 100);
    backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_Diversity)->Arg(2)->Arg(5)->Arg(10);
BENCHMARK_MAIN();
