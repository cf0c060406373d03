// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "attseq/kernels.hpp"

using namespace attseq;

namespace {

struct Workload {
  ModelConfig cfg;
  std::vector<EncodedInstance> instances;
  std::vector<Triplet> triplets;
  ModelParams params;
  std::vector<Vector> embeddings;
  std::vector<Vector> support;
  std::vector<ClassId> support_labels;

  Workload() {
    SyntheticSpec spec;
    spec.classes = 10;
    spec.per_class = 120;
    spec.seed = 1;
    const auto records = generate_synthetic(spec);
    const DatasetMeta meta = infer_meta(records);
    instances = encode_all(records, meta);
    Rng rng(1);
    triplets = sample_triplets(records, 1000, rng);
    params = init_params(cfg, meta, rng);
    embeddings = serial::embed_all(params, cfg, instances);
    for (std::size_t c = 0; c < spec.classes; ++c) {
      support.push_back(embeddings[c * spec.per_class]);
      support_labels.push_back(static_cast<ClassId>(c));
    }
  }
};

const Workload& workload() {
  static const Workload w;
  return w;
}

template <auto Fn>
void BM_EmbedAll(benchmark::State& state) {
  const Workload& w = workload();
  for (auto _ : state) benchmark::DoNotOptimize(Fn(w.params, w.cfg, w.instances));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.instances.size()));
}

template <auto Fn>
void BM_PairLosses(benchmark::State& state) {
  const Workload& w = workload();
  for (auto _ : state) {
    benchmark::DoNotOptimize(Fn(w.params, w.cfg, w.instances, w.triplets, 1.0, DistanceKind::Euclidean));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.triplets.size()));
}

template <auto Fn>
void BM_ClassifyAll(benchmark::State& state) {
  const Workload& w = workload();
  for (auto _ : state) {
    benchmark::DoNotOptimize(Fn(w.embeddings, w.support, w.support_labels, DistanceKind::Euclidean));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.embeddings.size()));
}

}  // namespace

BENCHMARK(BM_EmbedAll<serial::embed_all>)->Name("embed_all/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EmbedAll<parallel::embed_all>)->Name("embed_all/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PairLosses<serial::pair_losses>)->Name("pair_losses/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PairLosses<parallel::pair_losses>)->Name("pair_losses/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClassifyAll<serial::classify_all>)->Name("classify_all/serial")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ClassifyAll<parallel::classify_all>)->Name("classify_all/parallel")->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
