#pragma once

// The encoder: an m-layer dense branch over attributes, an LSTM branch over
// the one-hot sequence, and a dense fusion layer over their concatenation.

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "attseq/data.hpp"
#include "attseq/numkernel.hpp"

namespace attseq {

enum class Activation { Tanh, Relu };
enum class BranchMode { Both, AttributesOnly, SequenceOnly };

std::string_view to_string(Activation a);
std::string_view to_string(BranchMode b);
Activation parse_activation(std::string_view s);
BranchMode parse_branch_mode(std::string_view s);

struct ModelConfig {
  std::size_t m = 3;     // dense depth
  std::size_t n_m = 50;  // dense width
  std::size_t n_l = 50;  // LSTM width
  std::size_t n = 50;    // embedding width
  Activation activation = Activation::Tanh;
  BranchMode branch_mode = BranchMode::Both;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct DenseLayer {
  Matrix W;
  Vector b;
  bool operator==(const DenseLayer&) const = default;
};

/// Gate order everywhere: input, forget, output, candidate.
enum Gate : std::size_t { kInput = 0, kForget = 1, kOutput = 2, kCandidate = 3 };
inline constexpr std::size_t kGates = 4;

struct LstmParams {
  std::array<Matrix, kGates> W;  // n_l x r
  std::array<Matrix, kGates> U;  // n_l x n_l
  std::array<Vector, kGates> b;  // n_l
  bool operator==(const LstmParams&) const = default;
};

struct ModelParams {
  std::vector<DenseLayer> fc;
  LstmParams lstm;
  DenseLayer fusion;  // n x (n_m + n_l)

  std::size_t input_dim() const { return fc.empty() ? 0 : fc.front().W.cols(); }
  std::size_t alphabet_size() const { return lstm.W[0].cols(); }
  std::size_t dense_width() const { return fc.empty() ? 0 : fc.back().W.rows(); }
  std::size_t lstm_width() const { return lstm.U[0].rows(); }
  std::size_t embedding_dim() const { return fusion.W.rows(); }

  bool operator==(const ModelParams&) const = default;
};

/// Gradients mirror the parameter layout tensor for tensor.
using Gradients = ModelParams;

/// Named view of one parameter tensor.  Vectors report cols = 1.
struct TensorView {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  bool is_bias;
  std::span<double> data;
};
struct ConstTensorView {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  bool is_bias;
  std::span<const double> data;
};

/// Tensors in a fixed order: fc.k.{W,b}, lstm.{W,U,b}_{i,f,o,c}, fusion.{W,b}.
std::vector<TensorView> tensors(ModelParams& params);
std::vector<ConstTensorView> tensors(const ModelParams& params);

/// Params of the given shape with every entry zero.
ModelParams zero_params(const ModelConfig& cfg, std::size_t u, std::size_t r);
Gradients zeros_like(const ModelParams& params);

/// Throws ShapeError unless params match cfg for inputs of width u and
/// alphabet r.
void check_params(const ModelParams& params, const ModelConfig& cfg, std::size_t u,
                  std::size_t r);

/// Glorot-uniform dense and LSTM kernels, orthogonal recurrent matrices,
/// zero biases.
ModelParams init_params(const ModelConfig& cfg, const DatasetMeta& meta, Rng& rng);

/// Square orthogonal matrix from the QR factorization of a Gaussian draw,
/// with columns sign-fixed so R has a positive diagonal.
Matrix orthogonal_init(Rng& rng, std::size_t n);

struct LstmStep {
  Vector x;                     // input row
  std::array<Vector, kGates> gate;  // post-activation i, f, o, g
  Vector c;
  Vector h;
};

struct ForwardTrace {
  std::vector<Vector> fc_act;  // fc_act[0] is the input, fc_act[k] = alpha_k
  std::vector<LstmStep> steps;  // t = 1..true_len
  Vector fused_input;          // alpha_m (+) h_last after branch masking
  Vector embedding;
};

double activate(Activation a, double z);
/// Derivative expressed through the activation output y.
double activation_grad_from_output(Activation a, double y);

/// Dense branch.  Fills trace.fc_act and returns alpha_m.
Vector fc_forward(const ModelParams& params, Activation act, std::span<const double> v,
                  ForwardTrace* trace = nullptr);

/// LSTM over rows 0..true_len-1 from zero state; rows past true_len are
/// never read.  Returns h at true_len.
Vector lstm_forward(const ModelParams& params, const Matrix& seq, std::size_t true_len,
                    ForwardTrace* trace = nullptr);

ForwardTrace omega_forward(const ModelParams& params, const ModelConfig& cfg,
                           const EncodedInstance& inst);

Vector embed(const ModelParams& params, const ModelConfig& cfg, const EncodedInstance& inst);

}  // namespace attseq
