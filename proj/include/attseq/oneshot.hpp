#pragma once

// G-way one-shot episodes: one support exemplar per class, queries labeled
// by their nearest exemplar in embedding space.

#include <cstdint>
#include <string>
#include <vector>

#include "attseq/backprop.hpp"
#include "attseq/corenet.hpp"
#include "attseq/data.hpp"

namespace attseq {

/// Indices into a pool of instances drawn from the one-shot classes.
struct Episode {
  std::vector<std::size_t> support;
  std::vector<ClassId> support_labels;
  std::vector<std::size_t> queries;
  std::vector<ClassId> query_labels;
};

/// Picks G distinct classes, one exemplar per class, and n_queries further
/// instances of those classes without replacement.
Episode build_episode(const std::vector<ClassId>& pool_labels, std::size_t G,
                      std::size_t n_queries, Rng& rng);

/// Class of the nearest support exemplar; ties go to the smallest class id.
ClassId classify(const ModelParams& params, const ModelConfig& cfg, DistanceKind kind,
                 const std::vector<EncodedInstance>& support,
                 const std::vector<ClassId>& support_labels, const EncodedInstance& query);

struct EvalReport {
  std::size_t G = 0;
  std::size_t n_queries = 0;
  std::size_t n_runs = 0;
  DistanceKind distance = DistanceKind::Euclidean;
  std::vector<double> per_run;
  double median = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
  double mean = 0.0;
};

/// Linear-interpolation percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);

/// Runs n_runs episodes, each from its own child stream of `seed`.  The pool
/// is embedded once and reused by every episode.
EvalReport evaluate(const ModelParams& params, const ModelConfig& cfg, DistanceKind kind,
                    const std::vector<EncodedInstance>& pool,
                    const std::vector<ClassId>& pool_labels, std::size_t G,
                    std::size_t n_queries, std::size_t n_runs, std::uint64_t seed);

/// Accuracy of one episode given precomputed pool embeddings.
double episode_accuracy(const std::vector<Vector>& pool_embeddings, const Episode& episode,
                        DistanceKind kind);

std::string eval_report_json(const EvalReport& report);
std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& report);

}  // namespace attseq
