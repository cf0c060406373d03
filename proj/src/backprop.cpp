#include "attseq/backprop.hpp"

#include <cmath>
#include <stdexcept>

namespace attseq {

std::string_view to_string(DistanceKind k) {
  return k == DistanceKind::Euclidean ? "euclidean" : "manhattan";
}

std::string_view to_string(GradMode m) {
  return m == GradMode::Exact ? "exact" : "paper-literal";
}

DistanceKind parse_distance(std::string_view s) {
  if (s == "euclidean") return DistanceKind::Euclidean;
  if (s == "manhattan") return DistanceKind::Manhattan;
  throw std::invalid_argument("unknown distance '" + std::string(s) + "'");
}

GradMode parse_grad_mode(std::string_view s) {
  if (s == "exact") return GradMode::Exact;
  if (s == "paper-literal" || s == "paper_literal") return GradMode::Literal;
  throw std::invalid_argument("unknown grad mode '" + std::string(s) + "'");
}

double distance(DistanceKind kind, std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw ShapeError("distance: lengths " + std::to_string(p.size()) + " and " +
                     std::to_string(q.size()));
  }
  double acc = 0.0;
  if (kind == DistanceKind::Euclidean) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double d = p[k] - q[k];
      acc += d * d;
    }
    return std::sqrt(acc);
  }
  for (std::size_t k = 0; k < p.size(); ++k) acc += std::abs(p[k] - q[k]);
  return acc;
}

double contrastive_loss(double d, int ell, double margin) {
  if (d < 0.0 || std::isnan(d)) throw std::invalid_argument("contrastive_loss: negative distance");
  if (!(margin > 0.0)) throw std::invalid_argument("contrastive_loss: margin must be positive");
  const double hinge = std::max(0.0, margin - d);
  return 0.5 * ell * hinge * hinge + 0.5 * (1 - ell) * d * d;
}

double dloss_ddistance(double d, int ell, double margin) {
  return -ell * std::max(0.0, margin - d) + (1 - ell) * d;
}

Vector ddistance_dembedding(DistanceKind kind, GradMode mode, std::span<const double> p,
                            std::span<const double> q) {
  if (p.size() != q.size()) {
    throw ShapeError("embedding lengths " + std::to_string(p.size()) + " and " +
                     std::to_string(q.size()));
  }
  Vector out(p.size(), 0.0);
  if (mode == GradMode::Literal) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double diff = p[k] - q[k];
      out[k] = diff * (1.0 - diff);
    }
    return out;
  }
  if (kind == DistanceKind::Manhattan) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double diff = p[k] - q[k];
      out[k] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    }
    return out;
  }
  const double d = distance(DistanceKind::Euclidean, p, q);
  if (d == 0.0) return out;
  for (std::size_t k = 0; k < p.size(); ++k) out[k] = (p[k] - q[k]) / d;
  return out;
}

void backward_instance(const ModelParams& params, const ModelConfig& cfg,
                       const ForwardTrace& trace, std::span<const double> upstream,
                       Gradients& grads) {
  const std::size_t n_m = params.dense_width();
  const std::size_t n_l = params.lstm_width();
  if (upstream.size() != trace.embedding.size() || trace.embedding.size() != params.embedding_dim()) {
    throw ShapeError("upstream gradient does not match embedding width");
  }
  if (trace.fc_act.size() != params.fc.size() + 1 || trace.fused_input.size() != n_m + n_l) {
    throw ShapeError("forward trace does not match model parameters");
  }

  // Fusion layer.
  Vector dz(upstream.size());
  for (std::size_t k = 0; k < dz.size(); ++k) {
    dz[k] = upstream[k] * activation_grad_from_output(cfg.activation, trace.embedding[k]);
  }
  outer_add(grads.fusion.W, dz, trace.fused_input);
  axpy(1.0, dz, grads.fusion.b);
  const Vector dfused = matvec_transposed(params.fusion.W, dz);

  // Dense branch.
  if (cfg.branch_mode != BranchMode::SequenceOnly) {
    Vector dalpha(dfused.begin(), dfused.begin() + static_cast<std::ptrdiff_t>(n_m));
    for (std::size_t k = params.fc.size(); k-- > 0;) {
      const Vector& out = trace.fc_act[k + 1];
      const Vector& in = trace.fc_act[k];
      for (std::size_t j = 0; j < dalpha.size(); ++j) {
        dalpha[j] *= activation_grad_from_output(cfg.activation, out[j]);
      }
      outer_add(grads.fc[k].W, dalpha, in);
      axpy(1.0, dalpha, grads.fc[k].b);
      if (k > 0) dalpha = matvec_transposed(params.fc[k].W, dalpha);
    }
  }

  // LSTM branch, reverse through time from the last real step.
  if (cfg.branch_mode != BranchMode::AttributesOnly && !trace.steps.empty()) {
    const auto& L = params.lstm;
    auto& G = grads.lstm;
    Vector dh(dfused.begin() + static_cast<std::ptrdiff_t>(n_m), dfused.end());
    Vector dc_next(n_l, 0.0);
    const Vector zeros(n_l, 0.0);
    std::array<Vector, kGates> dpre;
    for (auto& v : dpre) v.assign(n_l, 0.0);

    for (std::size_t t = trace.steps.size(); t-- > 0;) {
      const LstmStep& s = trace.steps[t];
      const Vector& c_prev = t > 0 ? trace.steps[t - 1].c : zeros;
      const Vector& h_prev = t > 0 ? trace.steps[t - 1].h : zeros;
      const Vector& ig = s.gate[kInput];
      const Vector& fg = s.gate[kForget];
      const Vector& og = s.gate[kOutput];
      const Vector& gg = s.gate[kCandidate];
      for (std::size_t k = 0; k < n_l; ++k) {
        const double tc = std::tanh(s.c[k]);
        const double dc = dc_next[k] + dh[k] * og[k] * (1.0 - tc * tc);
        dpre[kOutput][k] = dh[k] * tc * og[k] * (1.0 - og[k]);
        dpre[kInput][k] = dc * gg[k] * ig[k] * (1.0 - ig[k]);
        dpre[kForget][k] = dc * c_prev[k] * fg[k] * (1.0 - fg[k]);
        dpre[kCandidate][k] = dc * ig[k] * (1.0 - gg[k] * gg[k]);
        dc_next[k] = dc * fg[k];
      }
      std::fill(dh.begin(), dh.end(), 0.0);
      for (std::size_t g = 0; g < kGates; ++g) {
        outer_add(G.W[g], dpre[g], s.x);
        outer_add(G.U[g], dpre[g], h_prev);
        axpy(1.0, dpre[g], G.b[g]);
        if (t > 0) matvec_transposed_add(L.U[g], dpre[g], dh);
      }
    }
  }
}

PairGradient backward_pair(const ModelParams& params, const ModelConfig& cfg,
                           const ForwardTrace& trace_i, const ForwardTrace& trace_j, int ell,
                           double margin, DistanceKind kind, GradMode mode) {
  if (ell != 0 && ell != 1) throw std::invalid_argument("similarity label must be 0 or 1");
  PairGradient out;
  out.grads = zeros_like(params);
  out.distance = distance(kind, trace_i.embedding, trace_j.embedding);
  out.loss = contrastive_loss(out.distance, ell, margin);

  const double dl_dd = dloss_ddistance(out.distance, ell, margin);
  if (dl_dd == 0.0) return out;
  if (mode == GradMode::Exact && kind == DistanceKind::Euclidean && out.distance == 0.0) {
    out.degenerate = ell == 1;
    return out;
  }
  Vector upstream = ddistance_dembedding(kind, mode, trace_i.embedding, trace_j.embedding);
  for (double& x : upstream) x *= dl_dd;
  backward_instance(params, cfg, trace_i, upstream, out.grads);
  for (double& x : upstream) x = -x;
  backward_instance(params, cfg, trace_j, upstream, out.grads);
  return out;
}

double pair_loss(const ModelParams& params, const ModelConfig& cfg, const EncodedInstance& a,
                 const EncodedInstance& b, int ell, double margin, DistanceKind kind) {
  const Vector pa = embed(params, cfg, a);
  const Vector pb = embed(params, cfg, b);
  return contrastive_loss(distance(kind, pa, pb), ell, margin);
}

Gradients finite_diff_grads(const ModelParams& params, const ModelConfig& cfg,
                            const EncodedInstance& a, const EncodedInstance& b, int ell,
                            double margin, DistanceKind kind, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  Gradients grads = zeros_like(params);
  auto grad_views = tensors(grads);

  std::vector<std::pair<std::size_t, std::size_t>> coords;  // (tensor, offset)
  for (std::size_t t = 0; t < grad_views.size(); ++t) {
    for (std::size_t i = 0; i < grad_views[t].data.size(); ++i) coords.emplace_back(t, i);
  }

#pragma omp parallel
  {
    ModelParams local = params;
    auto views = tensors(local);
#pragma omp for schedule(static)
    for (std::size_t k = 0; k < coords.size(); ++k) {
      const auto [t, i] = coords[k];
      double& theta = views[t].data[i];
      const double saved = theta;
      theta = saved + step;
      const double plus = pair_loss(local, cfg, a, b, ell, margin, kind);
      theta = saved - step;
      const double minus = pair_loss(local, cfg, a, b, ell, margin, kind);
      theta = saved;
      grad_views[t].data[i] = (plus - minus) / (2.0 * step);
    }
  }
  return grads;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

}  // namespace attseq
