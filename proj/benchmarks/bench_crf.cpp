#include <benchmark/benchmark.h>

#include "cetk/crf.hpp"
#include "cetk/random.hpp"

namespace {

using namespace cetk;

struct Problem {
  CrfModel model;
  SequenceFeatures features;
};

// Dense width 100 matches a typical embedding size; weights are small so the
// forward recursion runs in a realistic numeric range.
Problem make_problem(std::size_t length, std::size_t window) {
  Rng rng(3);
  Problem p{CrfModel(100, window), {}};
  std::vector<double> w(p.model.parameter_count());
  for (double& v : w) v = 0.05 * rng.normal();
  p.model.assign(w);
  p.features.length = length;
  p.features.width = p.model.width();
  p.features.values.resize(length * p.features.width);
  for (double& v : p.features.values) v = rng.uniform(-1.0, 1.0);
  return p;
}

void BM_ForwardBackward(benchmark::State& state) {
  const auto p = make_problem(static_cast<std::size_t>(state.range(0)), 0);
  for (auto _ : state) benchmark::DoNotOptimize(marginals(p.model, p.features));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(10)->Arg(30)->Arg(100);

void BM_Viterbi(benchmark::State& state) {
  const auto p = make_problem(static_cast<std::size_t>(state.range(0)), 0);
  for (auto _ : state) benchmark::DoNotOptimize(viterbi(p.model, p.features));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Viterbi)->Arg(10)->Arg(30)->Arg(100);

void BM_NllAndGrad(benchmark::State& state) {
  Rng rng(4);
  auto p = make_problem(20, static_cast<std::size_t>(state.range(0)));
  std::vector<TrainingSequence> batch;
  for (int i = 0; i < 32; ++i) {
    std::vector<IOTag> tags(20);
    for (auto& t : tags) t = tag_from_index(rng.below(kNumTags));
    batch.push_back({p.features, std::move(tags)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(nll_and_grad(p.model, batch));
}
BENCHMARK(BM_NllAndGrad)->Arg(0)->Arg(1);

}  // namespace
