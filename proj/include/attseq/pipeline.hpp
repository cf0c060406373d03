#pragma once

// End-to-end glue shared by the CLI and the acceptance suite: class split
// manifests, training on the train classes, evaluation on the held-out ones.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "attseq/oneshot.hpp"
#include "attseq/trainer.hpp"

namespace attseq {

/// A checkpoint, manifest or dataset that does not belong with the others.
class ArtifactMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SplitManifest {
  std::uint64_t seed = 0;
  double train_fraction = 0.6;
  std::vector<ClassId> train_classes;
  std::vector<ClassId> oneshot_classes;
  std::size_t n_records = 0;

  bool operator==(const SplitManifest&) const = default;
};

SplitManifest make_manifest(const std::vector<AttributedSequence>& records, double train_fraction,
                            std::uint64_t seed);
void save_manifest(const SplitManifest& manifest, const std::filesystem::path& path);
SplitManifest load_manifest(const std::filesystem::path& path);
/// Throws ArtifactMismatch unless every manifest class occurs in the records
/// and the record count agrees.
void check_manifest(const SplitManifest& manifest, const std::vector<AttributedSequence>& records);

struct PipelineConfig {
  ModelConfig model;
  TrainConfig train;
  std::size_t n_triplets = 1000;
  double positive_fraction = 0.5;
};

/// Samples triplets from the manifest's train classes, initializes and
/// trains a model.  Every random draw comes from a child of train.seed.
TrainResult train_on_split(const std::vector<AttributedSequence>& records, const DatasetMeta& meta,
                           const SplitManifest& manifest, const PipelineConfig& cfg);

/// Evaluates on the manifest's one-shot classes.
EvalReport evaluate_on_split(const ModelParams& params, const ModelConfig& model,
                             DistanceKind kind, const std::vector<AttributedSequence>& records,
                             const DatasetMeta& meta, const SplitManifest& manifest,
                             std::size_t G, std::size_t n_queries, std::size_t n_runs,
                             std::uint64_t seed);

}  // namespace attseq
