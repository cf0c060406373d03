#include "attseq/corenet.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/QR>

namespace attseq {
namespace {

constexpr std::array<const char*, kGates> kGateSuffix = {"i", "f", "o", "c"};

template <typename View, typename Params>
std::vector<View> collect_tensors(Params& p) {
  std::vector<View> out;
  for (std::size_t k = 0; k < p.fc.size(); ++k) {
    auto& layer = p.fc[k];
    const std::string prefix = "fc." + std::to_string(k) + ".";
    out.push_back({prefix + "W", layer.W.rows(), layer.W.cols(), false, layer.W.values()});
    out.push_back({prefix + "b", layer.b.size(), 1, true, layer.b});
  }
  for (std::size_t g = 0; g < kGates; ++g) {
    auto& W = p.lstm.W[g];
    out.push_back({std::string("lstm.W_") + kGateSuffix[g], W.rows(), W.cols(), false, W.values()});
  }
  for (std::size_t g = 0; g < kGates; ++g) {
    auto& U = p.lstm.U[g];
    out.push_back({std::string("lstm.U_") + kGateSuffix[g], U.rows(), U.cols(), false, U.values()});
  }
  for (std::size_t g = 0; g < kGates; ++g) {
    auto& b = p.lstm.b[g];
    out.push_back({std::string("lstm.b_") + kGateSuffix[g], b.size(), 1, true, b});
  }
  out.push_back({"fusion.W", p.fusion.W.rows(), p.fusion.W.cols(), false, p.fusion.W.values()});
  out.push_back({"fusion.b", p.fusion.b.size(), 1, true, p.fusion.b});
  return out;
}

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(name + " is " + m.shape_str() + ", expected (" + std::to_string(rows) + "x" +
                     std::to_string(cols) + ")");
  }
}

void expect_len(const Vector& v, std::size_t len, const std::string& name) {
  if (v.size() != len) {
    throw ShapeError(name + " has length " + std::to_string(v.size()) + ", expected " +
                     std::to_string(len));
  }
}

}  // namespace

std::string_view to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

std::string_view to_string(BranchMode b) {
  switch (b) {
    case BranchMode::Both: return "both";
    case BranchMode::AttributesOnly: return "attributes_only";
    case BranchMode::SequenceOnly: return "sequence_only";
  }
  return "both";
}

Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

BranchMode parse_branch_mode(std::string_view s) {
  if (s == "both") return BranchMode::Both;
  if (s == "attributes_only" || s == "attributes-only") return BranchMode::AttributesOnly;
  if (s == "sequence_only" || s == "sequence-only") return BranchMode::SequenceOnly;
  throw std::invalid_argument("unknown branch mode '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (m < 1 || n_m < 1 || n_l < 1 || n < 1) {
    throw std::invalid_argument("model dimensions must all be >= 1");
  }
}

std::vector<TensorView> tensors(ModelParams& params) {
  return collect_tensors<TensorView>(params);
}

std::vector<ConstTensorView> tensors(const ModelParams& params) {
  return collect_tensors<ConstTensorView>(params);
}

ModelParams zero_params(const ModelConfig& cfg, std::size_t u, std::size_t r) {
  cfg.validate();
  ModelParams p;
  for (std::size_t k = 0; k < cfg.m; ++k) {
    p.fc.push_back({Matrix(cfg.n_m, k == 0 ? u : cfg.n_m), Vector(cfg.n_m, 0.0)});
  }
  for (std::size_t g = 0; g < kGates; ++g) {
    p.lstm.W[g] = Matrix(cfg.n_l, r);
    p.lstm.U[g] = Matrix(cfg.n_l, cfg.n_l);
    p.lstm.b[g] = Vector(cfg.n_l, 0.0);
  }
  p.fusion = {Matrix(cfg.n, cfg.n_m + cfg.n_l), Vector(cfg.n, 0.0)};
  return p;
}

Gradients zeros_like(const ModelParams& params) {
  Gradients g = params;
  for (auto& t : tensors(g)) std::fill(t.data.begin(), t.data.end(), 0.0);
  return g;
}

void check_params(const ModelParams& params, const ModelConfig& cfg, std::size_t u,
                  std::size_t r) {
  if (params.fc.size() != cfg.m) {
    throw ShapeError("model has " + std::to_string(params.fc.size()) + " dense layers, config says " +
                     std::to_string(cfg.m));
  }
  for (std::size_t k = 0; k < cfg.m; ++k) {
    const std::string name = "fc." + std::to_string(k);
    expect_shape(params.fc[k].W, cfg.n_m, k == 0 ? u : cfg.n_m, name + ".W");
    expect_len(params.fc[k].b, cfg.n_m, name + ".b");
  }
  for (std::size_t g = 0; g < kGates; ++g) {
    const std::string s = kGateSuffix[g];
    expect_shape(params.lstm.W[g], cfg.n_l, r, "lstm.W_" + s);
    expect_shape(params.lstm.U[g], cfg.n_l, cfg.n_l, "lstm.U_" + s);
    expect_len(params.lstm.b[g], cfg.n_l, "lstm.b_" + s);
  }
  expect_shape(params.fusion.W, cfg.n, cfg.n_m + cfg.n_l, "fusion.W");
  expect_len(params.fusion.b, cfg.n, "fusion.b");
}

Matrix orthogonal_init(Rng& rng, std::size_t n) {
  Eigen::MatrixXd gauss(n, n);
  for (Eigen::Index i = 0; i < gauss.rows(); ++i) {
    for (Eigen::Index j = 0; j < gauss.cols(); ++j) gauss(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& packed = qr.matrixQR();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    if (packed(j, j) < 0.0) q.col(j) *= -1.0;
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out(i, j) = q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return out;
}

ModelParams init_params(const ModelConfig& cfg, const DatasetMeta& meta, Rng& rng) {
  ModelParams p = zero_params(cfg, meta.u, meta.r);
  for (std::size_t k = 0; k < cfg.m; ++k) {
    Rng layer_rng = rng.child("fc", k);
    auto& W = p.fc[k].W;
    W = uniform_init(layer_rng, W.rows(), W.cols(), glorot_bound(W.cols(), W.rows()));
  }
  const double kernel_bound = std::sqrt(6.0 / static_cast<double>(cfg.n_l));
  for (std::size_t g = 0; g < kGates; ++g) {
    Rng kernel_rng = rng.child("lstm.W", g);
    p.lstm.W[g] = uniform_init(kernel_rng, cfg.n_l, meta.r, kernel_bound);
    Rng recurrent_rng = rng.child("lstm.U", g);
    p.lstm.U[g] = orthogonal_init(recurrent_rng, cfg.n_l);
  }
  Rng fusion_rng = rng.child("fusion");
  auto& Wp = p.fusion.W;
  Wp = uniform_init(fusion_rng, Wp.rows(), Wp.cols(), glorot_bound(Wp.cols(), Wp.rows()));
  return p;
}

double activate(Activation a, double z) { return a == Activation::Tanh ? std::tanh(z) : relu(z); }

double activation_grad_from_output(Activation a, double y) {
  return a == Activation::Tanh ? 1.0 - y * y : (y > 0.0 ? 1.0 : 0.0);
}

Vector fc_forward(const ModelParams& params, Activation act, std::span<const double> v,
                  ForwardTrace* trace) {
  if (params.fc.empty()) throw ShapeError("model has no dense layers");
  if (v.size() != params.input_dim()) {
    throw ShapeError("attribute vector has length " + std::to_string(v.size()) +
                     ", model expects " + std::to_string(params.input_dim()));
  }
  Vector alpha(v.begin(), v.end());
  if (trace) {
    trace->fc_act.clear();
    trace->fc_act.push_back(alpha);
  }
  for (const auto& layer : params.fc) {
    Vector z = layer.b;
    matvec_add(layer.W, alpha, z);
    for (double& x : z) x = activate(act, x);
    alpha = std::move(z);
    if (trace) trace->fc_act.push_back(alpha);
  }
  return alpha;
}

Vector lstm_forward(const ModelParams& params, const Matrix& seq, std::size_t true_len,
                    ForwardTrace* trace) {
  if (true_len == 0) throw std::invalid_argument("lstm_forward: true_len must be >= 1");
  if (true_len > seq.rows()) {
    throw ShapeError("true_len " + std::to_string(true_len) + " exceeds sequence rows " +
                     std::to_string(seq.rows()));
  }
  if (seq.cols() != params.alphabet_size()) {
    throw ShapeError("sequence matrix " + seq.shape_str() + " does not match alphabet size " +
                     std::to_string(params.alphabet_size()));
  }
  const std::size_t n_l = params.lstm_width();
  const auto& L = params.lstm;
  Vector h(n_l, 0.0);
  Vector c(n_l, 0.0);
  if (trace) {
    trace->steps.clear();
    trace->steps.reserve(true_len);
  }
  for (std::size_t t = 0; t < true_len; ++t) {
    const auto x = seq.row(t);
    std::array<Vector, kGates> gate;
    for (std::size_t g = 0; g < kGates; ++g) {
      Vector z = L.b[g];
      matvec_add(L.W[g], x, z);
      matvec_add(L.U[g], h, z);
      for (double& v : z) v = g == kCandidate ? std::tanh(v) : sigmoid(v);
      gate[g] = std::move(z);
    }
    for (std::size_t k = 0; k < n_l; ++k) {
      c[k] = gate[kForget][k] * c[k] + gate[kInput][k] * gate[kCandidate][k];
      h[k] = gate[kOutput][k] * std::tanh(c[k]);
    }
    if (trace) trace->steps.push_back({Vector(x.begin(), x.end()), std::move(gate), c, h});
  }
  return h;
}

ForwardTrace omega_forward(const ModelParams& params, const ModelConfig& cfg,
                           const EncodedInstance& inst) {
  ForwardTrace trace;
  Vector alpha = fc_forward(params, cfg.activation, inst.attributes, &trace);
  Vector h = lstm_forward(params, inst.seq, inst.true_len, &trace);
  if (cfg.branch_mode == BranchMode::AttributesOnly) std::fill(h.begin(), h.end(), 0.0);
  if (cfg.branch_mode == BranchMode::SequenceOnly) std::fill(alpha.begin(), alpha.end(), 0.0);

  trace.fused_input = std::move(alpha);
  trace.fused_input.insert(trace.fused_input.end(), h.begin(), h.end());
  Vector p = params.fusion.b;
  matvec_add(params.fusion.W, trace.fused_input, p);
  for (double& x : p) x = activate(cfg.activation, x);
  trace.embedding = std::move(p);
  return trace;
}

Vector embed(const ModelParams& params, const ModelConfig& cfg, const EncodedInstance& inst) {
  return omega_forward(params, cfg, inst).embedding;
}

}  // namespace attseq
