#include "attseq/pipeline.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

namespace attseq {

using nlohmann::json;

SplitManifest make_manifest(const std::vector<AttributedSequence>& records, double train_fraction,
                            std::uint64_t seed) {
  Rng rng = Rng(seed).child("split");
  const ClassSplit split = split_by_class(records, train_fraction, rng);
  return {seed, train_fraction, split.train_classes, split.oneshot_classes, records.size()};
}

void save_manifest(const SplitManifest& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["seed"] = m.seed;
  j["train_fraction"] = m.train_fraction;
  j["n_records"] = m.n_records;
  j["train_classes"] = m.train_classes;
  j["oneshot_classes"] = m.oneshot_classes;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write error on " + path.string());
}

SplitManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  try {
    const json j = json::parse(in);
    SplitManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.train_fraction = j.at("train_fraction").get<double>();
    m.n_records = j.at("n_records").get<std::size_t>();
    m.train_classes = j.at("train_classes").get<std::vector<ClassId>>();
    m.oneshot_classes = j.at("oneshot_classes").get<std::vector<ClassId>>();
    return m;
  } catch (const json::exception& e) {
    throw ArtifactMismatch("invalid manifest " + path.string() + ": " + e.what());
  }
}

void check_manifest(const SplitManifest& manifest,
                    const std::vector<AttributedSequence>& records) {
  if (manifest.n_records != records.size()) {
    throw ArtifactMismatch("manifest was made for " + std::to_string(manifest.n_records) +
                           " records, dataset has " + std::to_string(records.size()));
  }
  std::set<ClassId> present;
  for (const auto& rec : records) {
    if (rec.label) present.insert(*rec.label);
  }
  for (const auto* group : {&manifest.train_classes, &manifest.oneshot_classes}) {
    for (ClassId c : *group) {
      if (!present.contains(c)) {
        throw ArtifactMismatch("manifest class " + std::to_string(c) + " is not in the dataset");
      }
    }
  }
  const std::set<ClassId> train(manifest.train_classes.begin(), manifest.train_classes.end());
  for (ClassId c : manifest.oneshot_classes) {
    if (train.contains(c)) {
      throw ArtifactMismatch("class " + std::to_string(c) + " is on both sides of the manifest");
    }
  }
}

TrainResult train_on_split(const std::vector<AttributedSequence>& records, const DatasetMeta& meta,
                           const SplitManifest& manifest, const PipelineConfig& cfg) {
  const Rng root(cfg.train.seed);
  const auto train_set = filter_by_class(records, manifest.train_classes);
  Rng triplet_rng = root.child("triplets");
  const auto triplets =
      sample_triplets(train_set, cfg.n_triplets, triplet_rng, cfg.positive_fraction);
  const auto instances = encode_all(train_set, meta);
  Rng init_rng = root.child("init");
  ModelParams params = init_params(cfg.model, meta, init_rng);
  return train(std::move(params), cfg.model, instances, triplets, cfg.train);
}

EvalReport evaluate_on_split(const ModelParams& params, const ModelConfig& model,
                             DistanceKind kind, const std::vector<AttributedSequence>& records,
                             const DatasetMeta& meta, const SplitManifest& manifest,
                             std::size_t G, std::size_t n_queries, std::size_t n_runs,
                             std::uint64_t seed) {
  const auto pool = filter_by_class(records, manifest.oneshot_classes);
  std::vector<ClassId> labels;
  labels.reserve(pool.size());
  for (const auto& rec : pool) labels.push_back(*rec.label);
  return evaluate(params, model, kind, encode_all(pool, meta), labels, G, n_queries, n_runs,
                  seed);
}

}  // namespace attseq
