#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "probe/compliance.hpp"
#include "probe/stats.hpp"
#include "probe/text_metrics.hpp"

namespace {

std::string random_sentence(std::mt19937_64& rng, std::size_t words) {
  static const char* vocab[] = {"the", "cat", "sat", "on", "a", "mat", "and", "we", "never", "really",
                                "talk", "about", "it", "people", "say", "that", "weird", "fine", "ok", "maybe"};
  std::uniform_int_distribution<std::size_t> pick(0, std::size(vocab) - 1);
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += vocab[pick(rng)];
  }
  return s;
}

std::vector<double> normal_deltas(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.02, 0.1);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

void BM_Rouge1(benchmark::State& state) {
  std::mt19937_64 rng(1);
  auto a = random_sentence(rng, state.range(0)), b = random_sentence(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(probe::rouge1_f1(a, b));
}
BENCHMARK(BM_Rouge1)->Arg(16)->Arg(64)->Arg(256);

void BM_RougeL(benchmark::State& state) {
  std::mt19937_64 rng(2);
  auto a = random_sentence(rng, state.range(0)), b = random_sentence(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(probe::rougeL_f1(a, b));
}
BENCHMARK(BM_RougeL)->Arg(16)->Arg(64)->Arg(256);

void BM_WilcoxonExact(benchmark::State& state) {
  auto d = normal_deltas(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(probe::stats::wilcoxon_signed_rank(d));
}
BENCHMARK(BM_WilcoxonExact)->Arg(12)->Arg(25);

void BM_WilcoxonNormal(benchmark::State& state) {
  auto d = normal_deltas(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(probe::stats::wilcoxon_signed_rank(d));
}
BENCHMARK(BM_WilcoxonNormal)->Arg(1000)->Arg(13274);

void BM_Bootstrap(benchmark::State& state) {
  auto d = normal_deltas(static_cast<std::size_t>(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(probe::stats::bootstrap_ci(d, 10'000, 0.95, 7));
}
BENCHMARK(BM_Bootstrap)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Classify(benchmark::State& state) {
  const std::string source = "I never really talk about it because people say that it is weird.";
  const std::vector<std::string> outputs = {
      "Rewritten Sentence:",
      "Here is the rewritten sentence:\n\nI don't talk about it since people call it weird.",
      "I'm sorry, but I can't help with that.",
      "Honestly, I never really talk about it, people just say it's weird, you know?",
  };
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(probe::classify(outputs[i++ % outputs.size()], source));
}
BENCHMARK(BM_Classify);

}  // namespace

BENCHMARK_MAIN();
