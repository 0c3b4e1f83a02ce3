#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "fairtext/classifier.h"
#include "fairtext/corpus.h"
#include "fairtext/explainer.h"
#include "fairtext/lexical.h"
#include "fairtext/moderator.h"
#include "fairtext/random.h"

namespace {

using namespace fairtext;

std::string word(std::size_t i) { return "w" + std::to_string(i); }

LabeledCorpus make_corpus(std::size_t documents, std::size_t vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LabeledCorpus corpus;
  for (std::size_t d = 0; d < documents; ++d) {
    std::string text;
    const bool positive = uniform_below(rng, 3) == 0;
    const std::size_t len = 8 + uniform_below(rng, 12);
    for (std::size_t i = 0; i < len; ++i) {
      std::size_t w = uniform_below(rng, vocab);
      if (positive && i == 0) w = uniform_below(rng, 10);
      text += (i ? " " : "") + word(w);
    }
    corpus.documents.push_back(
        make_document("d" + std::to_string(d), text, positive ? "toxic" : "non_toxic"));
  }
  refresh_classes(corpus);
  return corpus;
}

void BM_Tokenize(benchmark::State& state) {
  const std::string text =
      "Some users wrote THIS, and others didn't: the quick brown fox jumps over the lazy dog. ";
  std::string long_text;
  for (int i = 0; i < state.range(0); ++i) long_text += text;
  for (auto _ : state) benchmark::DoNotOptimize(tokenize(long_text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(long_text.size()));
}
BENCHMARK(BM_Tokenize)->Arg(1)->Arg(100);

void BM_Train(benchmark::State& state) {
  const auto corpus = make_corpus(static_cast<std::size_t>(state.range(0)), 1500, 1);
  for (auto _ : state) benchmark::DoNotOptimize(train(corpus, TrainConfig{}));
}
BENCHMARK(BM_Train)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_Aggregate(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::vector<AttributionRecord> records;
  for (int r = 0; r < state.range(0); ++r) {
    AttributionRecord rec{"d" + std::to_string(r), "toxic", {}};
    for (std::size_t i = 0; i < 15; ++i) {
      rec.token_scores.push_back({i, word(uniform_below(rng, 2000)), uniform_unit(rng) - 0.5});
    }
    records.push_back(rec);
  }
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_global(records));
}
BENCHMARK(BM_Aggregate)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_KNearest(benchmark::State& state) {
  std::mt19937_64 rng(3);
  EmbeddingTable table(100);
  std::vector<float> v(100);
  for (int i = 0; i < state.range(0); ++i) {
    for (auto& x : v) x = static_cast<float>(uniform_unit(rng) - 0.5);
    table.add(word(static_cast<std::size_t>(i)), v);
  }
  for (auto _ : state) benchmark::DoNotOptimize(k_nearest(table, "w0", 5));
}
BENCHMARK(BM_KNearest)->Arg(1000)->Arg(20000)->Unit(benchmark::kMicrosecond);

void BM_ModerateWordRemoval(benchmark::State& state) {
  const auto corpus = make_corpus(static_cast<std::size_t>(state.range(0)), 1500, 4);
  MitigationPlan plan;
  plan.strategy = Strategy::kWordRemoval;
  for (std::size_t i = 0; i < 20; ++i) plan.protected_words.push_back(word(i));
  for (auto _ : state) benchmark::DoNotOptimize(moderate(corpus, plan, {}));
}
BENCHMARK(BM_ModerateWordRemoval)->Arg(4000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
