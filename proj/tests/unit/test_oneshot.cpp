#include <algorithm>
#include <set>

#include "attseq/kernels.hpp"
#include "attseq/oneshot.hpp"
#include "doctest.h"

using namespace attseq;

namespace {

struct Pool {
  ModelConfig cfg;
  DatasetMeta meta{10, 12, 15, {}};
  ModelParams params;
  std::vector<EncodedInstance> instances;
  std::vector<ClassId> labels;

  explicit Pool(std::size_t classes = 6, std::size_t per_class = 15) {
    cfg.n_m = cfg.n_l = cfg.n = 8;
    SyntheticSpec spec;
    spec.classes = classes;
    spec.per_class = per_class;
    spec.seed = 4;
    const auto records = generate_synthetic(spec);
    instances = encode_all(records, meta);
    // Spread labels over non-contiguous ids.
    for (const auto& rec : records) labels.push_back(*rec.label * 10 + 3);
    Rng rng(4);
    params = init_params(cfg, meta, rng);
  }
};

}  // namespace

TEST_CASE("episode structure") {
  const Pool pool;
  Rng rng(1);
  const Episode ep = build_episode(pool.labels, 4, 30, rng);
  CHECK(ep.support.size() == 4);
  CHECK(std::set<ClassId>(ep.support_labels.begin(), ep.support_labels.end()).size() == 4);
  CHECK(std::is_sorted(ep.support_labels.begin(), ep.support_labels.end()));
  for (std::size_t k = 0; k < 4; ++k) CHECK(pool.labels[ep.support[k]] == ep.support_labels[k]);

  CHECK(ep.queries.size() == 30);
  const std::set<std::size_t> unique(ep.queries.begin(), ep.queries.end());
  CHECK(unique.size() == 30);
  const std::set<ClassId> classes(ep.support_labels.begin(), ep.support_labels.end());
  for (std::size_t k = 0; k < ep.queries.size(); ++k) {
    CHECK(std::find(ep.support.begin(), ep.support.end(), ep.queries[k]) == ep.support.end());
    CHECK(classes.contains(ep.query_labels[k]));
    CHECK(pool.labels[ep.queries[k]] == ep.query_labels[k]);
  }

  Rng again(1);
  const Episode ep2 = build_episode(pool.labels, 4, 30, again);
  CHECK(ep2.support == ep.support);
  CHECK(ep2.queries == ep.queries);
}

TEST_CASE("episode errors") {
  const Pool pool(3, 5);
  Rng rng(2);
  CHECK_THROWS_AS(build_episode(pool.labels, 4, 1, rng), DataError);
  // Three classes of five leave twelve non-support instances.
  CHECK_NOTHROW(build_episode(pool.labels, 3, 12, rng));
  try {
    build_episode(pool.labels, 3, 13, rng);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("13") != std::string::npos);
  }
  CHECK_THROWS_AS(build_episode(pool.labels, 0, 1, rng), std::invalid_argument);
  CHECK_THROWS_AS(build_episode(pool.labels, 2, 0, rng), std::invalid_argument);
}

TEST_CASE("classify returns the exemplar a query coincides with") {
  const Pool pool;
  const std::vector<EncodedInstance> support{pool.instances[0], pool.instances[20], pool.instances[40]};
  const std::vector<ClassId> labels{pool.labels[0], pool.labels[20], pool.labels[40]};
  for (std::size_t k = 0; k < support.size(); ++k) {
    for (DistanceKind kind : {DistanceKind::Euclidean, DistanceKind::Manhattan}) {
      CHECK(classify(pool.params, pool.cfg, kind, support, labels, support[k]) == labels[k]);
    }
  }
}

TEST_CASE("classification is closed over labels and invariant to support order") {
  const Pool pool;
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Episode ep = build_episode(pool.labels, 4, 10, rng);
    std::vector<EncodedInstance> support;
    for (std::size_t s : ep.support) support.push_back(pool.instances[s]);
    std::vector<std::size_t> perm{0, 1, 2, 3};
    rng.shuffle(perm);
    std::vector<EncodedInstance> support_p;
    std::vector<ClassId> labels_p;
    for (std::size_t k : perm) {
      support_p.push_back(support[k]);
      labels_p.push_back(ep.support_labels[k]);
    }
    for (std::size_t q : ep.queries) {
      const ClassId a =
          classify(pool.params, pool.cfg, DistanceKind::Euclidean, support, ep.support_labels, pool.instances[q]);
      const ClassId b =
          classify(pool.params, pool.cfg, DistanceKind::Euclidean, support_p, labels_p, pool.instances[q]);
      CHECK(a == b);
      CHECK(std::find(ep.support_labels.begin(), ep.support_labels.end(), a) != ep.support_labels.end());
    }
  }
}

TEST_CASE("cached support embeddings match per-query classification") {
  const Pool pool;
  const auto embeddings = serial::embed_all(pool.params, pool.cfg, pool.instances);
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Episode ep = build_episode(pool.labels, 5, 40, rng);
    std::vector<EncodedInstance> support;
    for (std::size_t s : ep.support) support.push_back(pool.instances[s]);
    std::size_t correct = 0;
    for (std::size_t k = 0; k < ep.queries.size(); ++k) {
      const ClassId c = classify(pool.params, pool.cfg, DistanceKind::Manhattan, support,
                                 ep.support_labels, pool.instances[ep.queries[k]]);
      if (c == ep.query_labels[k]) ++correct;
    }
    CHECK(episode_accuracy(embeddings, ep, DistanceKind::Manhattan) ==
          static_cast<double>(correct) / static_cast<double>(ep.queries.size()));
  }
}

TEST_CASE("one-way episodes are always correct") {
  const Pool pool;
  const auto r = evaluate(pool.params, pool.cfg, DistanceKind::Euclidean, pool.instances,
                          pool.labels, 1, 10, 5, 7);
  for (double acc : r.per_run) CHECK(acc == 1.0);
}

TEST_CASE("evaluation report statistics") {
  const Pool pool;
  const auto one = evaluate(pool.params, pool.cfg, DistanceKind::Euclidean, pool.instances,
                            pool.labels, 4, 20, 1, 7);
  REQUIRE(one.per_run.size() == 1);
  CHECK(one.median == one.per_run[0]);
  CHECK(one.p25 == one.per_run[0]);
  CHECK(one.p75 == one.per_run[0]);

  const auto a = evaluate(pool.params, pool.cfg, DistanceKind::Euclidean, pool.instances,
                          pool.labels, 4, 20, 10, 8);
  const auto b = evaluate(pool.params, pool.cfg, DistanceKind::Euclidean, pool.instances,
                          pool.labels, 4, 20, 10, 8);
  CHECK(a.per_run == b.per_run);
  CHECK(eval_report_json(a) == eval_report_json(b));
  CHECK(a.p25 <= a.median);
  CHECK(a.median <= a.p75);
  CHECK(a.per_run.size() == 10);
}

TEST_CASE("percentile interpolates linearly") {
  CHECK(percentile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 0.5) == 2.5);
  CHECK(percentile({1.0, 2.0, 3.0, 4.0, 5.0}, 0.25) == 2.0);
  CHECK(percentile({0.0, 1.0}, 0.75) == 0.75);
  CHECK_THROWS_AS(percentile({}, 0.5), std::invalid_argument);
}

TEST_CASE("report serialization") {
  EvalReport r;
  r.G = 4;
  r.n_queries = 10;
  r.n_runs = 2;
  r.distance = DistanceKind::Manhattan;
  r.per_run = {0.5, 1.0};
  r.median = 0.75;
  r.p25 = 0.625;
  r.p75 = 0.875;
  r.mean = 0.75;
  CHECK(eval_csv_header() == "G,n_queries,n_runs,distance,median,p25,p75,mean");
  CHECK(eval_csv_row(r) == "4,10,2,manhattan,0.75,0.625,0.875,0.75");
  const std::string json = eval_report_json(r);
  for (const char* key : {"\"G\"", "\"n_queries\"", "\"n_runs\"", "\"distance\"", "\"per_run\"",
                          "\"median\"", "\"p25\"", "\"p75\""}) {
    CHECK(json.find(key) != std::string::npos);
  }
}
