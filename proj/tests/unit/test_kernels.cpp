#include <omp.h>

#include "attseq/kernels.hpp"
#include "doctest.h"

using namespace attseq;

namespace {

struct Fixture {
  ModelConfig cfg;
  DatasetMeta meta{10, 12, 15, {}};
  ModelParams params;
  std::vector<EncodedInstance> instances;
  std::vector<Triplet> triplets;

  Fixture() {
    cfg.n_m = cfg.n_l = cfg.n = 16;
    SyntheticSpec spec;
    spec.classes = 5;
    spec.per_class = 20;
    spec.seed = 3;
    const auto records = generate_synthetic(spec);
    instances = encode_all(records, meta);
    Rng rng(3);
    params = init_params(cfg, meta, rng);
    triplets = sample_triplets(records, 200, rng);
  }
};

}  // namespace

TEST_CASE("nearest_support picks the argmin and breaks ties by class id") {
  // One-dimensional support points at distances 0.3, 0.1, 0.5 from the query.
  const std::vector<Vector> support{{0.3}, {0.1}, {-0.5}};
  CHECK(nearest_support(Vector{0.0}, support, {7, 2, 9}, DistanceKind::Euclidean) == 1);

  const std::vector<Vector> tied{{1.0}, {-1.0}};
  CHECK(nearest_support(Vector{0.0}, tied, {5, 3}, DistanceKind::Euclidean) == 1);
  CHECK(nearest_support(Vector{0.0}, tied, {3, 5}, DistanceKind::Manhattan) == 0);
  CHECK_THROWS_AS(nearest_support(Vector{0.0}, {}, {}, DistanceKind::Euclidean), ShapeError);
}

TEST_CASE("serial and parallel kernels agree bitwise") {
  const Fixture f;
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    const auto es = serial::embed_all(f.params, f.cfg, f.instances);
    const auto ep = parallel::embed_all(f.params, f.cfg, f.instances);
    CHECK(es == ep);

    for (DistanceKind k : {DistanceKind::Euclidean, DistanceKind::Manhattan}) {
      const auto ls = serial::pair_losses(f.params, f.cfg, f.instances, f.triplets, 1.0, k);
      const auto lp = parallel::pair_losses(f.params, f.cfg, f.instances, f.triplets, 1.0, k);
      CHECK(ls == lp);
      CHECK(ordered_mean(ls) == ordered_mean(lp));

      const std::vector<Vector> support(es.begin(), es.begin() + 5);
      const std::vector<ClassId> labels{0, 1, 2, 3, 4};
      CHECK(serial::classify_all(es, support, labels, k) ==
            parallel::classify_all(es, support, labels, k));
    }
  }
}

TEST_CASE("parallel kernels propagate errors") {
  Fixture f;
  omp_set_num_threads(4);
  f.triplets.push_back({0, f.instances.size(), 1});
  CHECK_THROWS_AS(parallel::pair_losses(f.params, f.cfg, f.instances, f.triplets, 1.0,
                                        DistanceKind::Euclidean),
                  std::out_of_range);
  f.instances[7].attributes.pop_back();
  CHECK_THROWS_AS(parallel::embed_all(f.params, f.cfg, f.instances), ShapeError);
}

TEST_CASE("ordered_mean") {
  CHECK(ordered_mean({1.0, 2.0, 6.0}) == 3.0);
  CHECK(ordered_mean({}) == 0.0);
}
