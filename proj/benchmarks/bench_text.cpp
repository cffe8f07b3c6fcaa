#include <benchmark/benchmark.h>

#include <string>

#include "cetk/text.hpp"

namespace {

const std::string kTweet =
    "Stress at work is giving me terrible headaches again #migraine @doc "
    "https://example.com/x?y=1 \xF0\x9F\x98\xAB and I can't sleep. Coffee doesn't help either!";

void BM_Tokenize(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(cetk::tokenize(kTweet));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(kTweet.size()));
}
BENCHMARK(BM_Tokenize);

void BM_ProcessTweet(benchmark::State& state) {
  const cetk::Tweet tweet{"t1", kTweet};
  for (auto _ : state) benchmark::DoNotOptimize(cetk::process_tweet(tweet));
}
BENCHMARK(BM_ProcessTweet);

}  // namespace
