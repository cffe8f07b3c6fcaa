#include <benchmark/benchmark.h>

#include "cetk/clustering.hpp"
#include "cetk/synthetic.hpp"

namespace {

// Assigns every family phrase of the synthetic corpus into a seeded set. Each
// iteration starts from the seeds so the cluster count stays comparable.
void BM_AssignPhrases(benchmark::State& state) {
  const auto corpus = cetk::generate_synthetic();
  std::vector<std::string> phrases;
  for (const auto& f : corpus.families) phrases.insert(phrases.end(), f.phrases.begin(), f.phrases.end());
  const auto ordered = cetk::canonical_phrase_order(phrases);
  const auto seeded = cetk::seed_clusters(corpus.seeds, corpus.embeddings);
  for (auto _ : state) {
    auto clusters = seeded;
    for (const auto& [p, n] : ordered) {
      benchmark::DoNotOptimize(cetk::assign(p, clusters, corpus.embeddings, {}, n));
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ordered.size()));
}
BENCHMARK(BM_AssignPhrases);

}  // namespace
