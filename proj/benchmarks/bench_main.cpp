#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "psybench/corpus.hpp"
#include "psybench/metrics.hpp"
#include "psybench/scale_parser.hpp"
#include "psybench/toy_lm.hpp"
#include "psybench/util.hpp"

using namespace psybench;

namespace {

std::vector<TraitVector> random_vectors(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TraitVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 5> v{};
    for (double& x : v) x = 100.0 * uniform_unit(rng);
    out.push_back(validate_trait_vector(v));
  }
  return out;
}

std::vector<std::string> texts(std::size_t n, std::uint64_t seed) {
  static const char* words[] = {"calm", "river", "quietly", "listens", "before", "speaking",
                                "often", "plans", "ahead", "laughs", "rarely", "worries"};
  Rng rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    const std::size_t len = 30 + uniform_below(rng, 40);
    for (std::size_t w = 0; w < len; ++w) s += std::string(words[uniform_below(rng, 12)]) + " ";
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

static void BM_Evaluate(benchmark::State& state) {
  const auto p = random_vectors(static_cast<std::size_t>(state.range(0)), 1);
  const auto t = random_vectors(p.size(), 2);
  std::vector<ScoredItem> items;
  for (std::size_t i = 0; i < p.size(); ++i) items.push_back({p[i], t[i]});
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(items));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Evaluate)->Arg(1000)->Arg(38880);

static void BM_EnumerateGrid(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_grid());
}
BENCHMARK(BM_EnumerateGrid);

static void BM_ParseScores(benchmark::State& state) {
  const std::string text =
      "Looking at the writing overall I would rate it as follows.\n"
      "Openness: 72\nConscientiousness: 55\nExtraversion: 31\nAgreeableness: 64\nNeuroticism: 48\n";
  for (auto _ : state) benchmark::DoNotOptimize(try_apply_scale(extract_raw_traits(text)));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseScores);

static void BM_Dedup(benchmark::State& state) {
  const auto corpus = texts(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(dedup_indices(corpus, 0.8));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Dedup)->Arg(500)->Arg(5000);

static void BM_GradCheck(benchmark::State& state) {
  const std::string alpha = "abcdefghij ";
  const auto model = ToyLM::random(alpha, 7);
  ToyBatch batch;
  const auto t = validate_trait_vector(std::array<double, 5>{50, 50, 50, 50, 50});
  batch.sft.push_back({{"a bad cafe hid a fig", {}}, t, t});
  for (auto _ : state) benchmark::DoNotOptimize(grad_check(model, batch, ToyObjective{}, 1e-5));
}
BENCHMARK(BM_GradCheck);

static void BM_TrainStep(benchmark::State& state) {
  const std::string alpha = "abcdefghij ";
  const auto ref = ToyLM::random(alpha, 8);
  ToyObjective obj;
  obj.kind = Objective::Dpo;
  obj.reference = &ref;
  ToyBatch batch;
  batch.dpo.push_back({{"a bad cafe hid a fig", {}}, {"jj ii hh gg", {}}});
  for (auto _ : state) benchmark::DoNotOptimize(toy_train_step(ref, batch, obj, 0.01));
}
BENCHMARK(BM_TrainStep);
BENCHMARK_MAIN();
