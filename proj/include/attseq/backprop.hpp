#pragma once

// Distances, the contrastive loss and reverse-mode gradients through the
// encoder, plus a central-difference oracle.

#include <string_view>

#include "attseq/corenet.hpp"

namespace attseq {

enum class DistanceKind { Euclidean, Manhattan };

/// Exact uses the analytic derivative of the distance.  Literal uses
/// (p_i - p_j) * (1 - (p_i - p_j)) elementwise in its place; it is kept for
/// fidelity experiments and is not expected to pass a gradient check.
enum class GradMode { Exact, Literal };

std::string_view to_string(DistanceKind k);
std::string_view to_string(GradMode m);
DistanceKind parse_distance(std::string_view s);
GradMode parse_grad_mode(std::string_view s);

double distance(DistanceKind kind, std::span<const double> p, std::span<const double> q);

/// 1/2 ell max(0, margin - d)^2 + 1/2 (1 - ell) d^2
double contrastive_loss(double d, int ell, double margin);

/// -ell max(0, margin - d) + (1 - ell) d
double dloss_ddistance(double d, int ell, double margin);

/// d(distance)/d(p), evaluated at diff = p - q.  The derivative with
/// respect to q is the negation.
Vector ddistance_dembedding(DistanceKind kind, GradMode mode, std::span<const double> p,
                            std::span<const double> q);

/// Accumulates into `grads` the gradient of <upstream, embedding> through
/// the encoder that produced `trace`.
void backward_instance(const ModelParams& params, const ModelConfig& cfg,
                       const ForwardTrace& trace, std::span<const double> upstream,
                       Gradients& grads);

struct PairGradient {
  double loss = 0.0;
  double distance = 0.0;
  Gradients grads;
  /// Set for Euclidean dissimilar pairs at d = 0, where the direction is
  /// undefined; grads are zero in that case.
  bool degenerate = false;
};

PairGradient backward_pair(const ModelParams& params, const ModelConfig& cfg,
                           const ForwardTrace& trace_i, const ForwardTrace& trace_j, int ell,
                           double margin, DistanceKind kind, GradMode mode = GradMode::Exact);

/// Forward both instances and return the contrastive loss.
double pair_loss(const ModelParams& params, const ModelConfig& cfg, const EncodedInstance& a,
                 const EncodedInstance& b, int ell, double margin, DistanceKind kind);

/// Central differences per scalar parameter, recomputing the full forward
/// pass for every perturbation.
Gradients finite_diff_grads(const ModelParams& params, const ModelConfig& cfg,
                            const EncodedInstance& a, const EncodedInstance& b, int ell,
                            double margin, DistanceKind kind, double step);

/// |a - b| / max(1e-8, |a| + |b|)
double relative_error(double a, double b);

}  // namespace attseq
