#pragma once

// Data-parallel loops over instances.  Each kernel has a serial reference in
// `serial::` and an OpenMP version in `parallel::`; the two produce bitwise
// identical results because every output slot is written by exactly one
// iteration and reductions happen afterwards in index order.

#include <vector>

#include "attseq/backprop.hpp"
#include "attseq/corenet.hpp"
#include "attseq/data.hpp"

namespace attseq {

/// Index of the support embedding closest to `query`; ties go to the
/// smallest class id.
std::size_t nearest_support(std::span<const double> query, const std::vector<Vector>& support,
                            const std::vector<ClassId>& support_labels, DistanceKind kind);

namespace serial {

std::vector<Vector> embed_all(const ModelParams& params, const ModelConfig& cfg,
                              const std::vector<EncodedInstance>& instances);

std::vector<double> pair_losses(const ModelParams& params, const ModelConfig& cfg,
                                const std::vector<EncodedInstance>& instances,
                                const std::vector<Triplet>& triplets, double margin,
                                DistanceKind kind);

std::vector<ClassId> classify_all(const std::vector<Vector>& queries,
                                  const std::vector<Vector>& support,
                                  const std::vector<ClassId>& support_labels, DistanceKind kind);

}  // namespace serial

namespace parallel {

std::vector<Vector> embed_all(const ModelParams& params, const ModelConfig& cfg,
                              const std::vector<EncodedInstance>& instances);

std::vector<double> pair_losses(const ModelParams& params, const ModelConfig& cfg,
                                const std::vector<EncodedInstance>& instances,
                                const std::vector<Triplet>& triplets, double margin,
                                DistanceKind kind);

std::vector<ClassId> classify_all(const std::vector<Vector>& queries,
                                  const std::vector<Vector>& support,
                                  const std::vector<ClassId>& support_labels, DistanceKind kind);

}  // namespace parallel

/// Sum in index order.
double ordered_mean(const std::vector<double>& values);

}  // namespace attseq
