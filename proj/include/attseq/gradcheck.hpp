#pragma once

// Backprop-versus-central-difference harness over small random models.

#include <cstdint>
#include <string>

#include "attseq/backprop.hpp"

namespace attseq {

struct GradCheckCase {
  ModelConfig model;
  DatasetMeta meta;
  ModelParams params;
  EncodedInstance a;
  EncodedInstance b;
  int ell = 0;
  double margin = 1.0;
  DistanceKind kind = DistanceKind::Euclidean;
};

/// Trial k uses ell = k % 2 and alternates distance kinds every two trials,
/// so any four consecutive trials cover both kinds and both labels.  Dims
/// are drawn with u <= 5, r <= 6, t_max <= 6 and every width <= 6.
GradCheckCase random_gradcheck_case(std::uint64_t seed, std::size_t trial);

struct GradCheckResult {
  std::size_t trials = 0;
  std::size_t coordinates = 0;
  double max_rel_err = 0.0;
  std::size_t worst_trial = 0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

GradCheckResult run_gradcheck(std::size_t trials, std::uint64_t seed, GradMode mode = GradMode::Exact,
                              double step = 1e-5);

}  // namespace attseq
