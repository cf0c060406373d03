#include <cmath>

#include "attseq/corenet.hpp"
#include "doctest.h"

using namespace attseq;

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.m = 2;
  cfg.n_m = 4;
  cfg.n_l = 5;
  cfg.n = 3;
  return cfg;
}

AttributedSequence random_record(Rng& rng, const DatasetMeta& meta) {
  AttributedSequence rec;
  for (std::size_t k = 0; k < meta.u; ++k) rec.attributes.push_back(rng.normal());
  const std::size_t len = 1 + rng.below(meta.t_max);
  for (std::size_t t = 0; t < len; ++t) rec.items.push_back(static_cast<ItemId>(rng.below(meta.r)));
  return rec;
}

}  // namespace

TEST_CASE("init shapes, zero biases and bounds") {
  const ModelConfig cfg;  // defaults
  const DatasetMeta meta{10, 12, 15, {}};
  Rng rng(1);
  const ModelParams p = init_params(cfg, meta, rng);
  CHECK_NOTHROW(check_params(p, cfg, meta.u, meta.r));
  CHECK(p.embedding_dim() == 50);

  for (const auto& t : tensors(p)) {
    if (!t.is_bias) continue;
    for (double x : t.data) CHECK(x == 0.0);
  }
  const double fc1_bound = std::sqrt(6.0 / (10.0 + 50.0));
  for (double x : p.fc[0].W.values()) CHECK(std::abs(x) <= fc1_bound);
  const double lstm_bound = std::sqrt(6.0 / 50.0);
  for (const auto& W : p.lstm.W) {
    for (double x : W.values()) CHECK(std::abs(x) <= lstm_bound);
  }
}

TEST_CASE("recurrent matrices are orthogonal") {
  const ModelConfig cfg;
  Rng rng(2);
  const ModelParams p = init_params(cfg, DatasetMeta{3, 4, 5, {}}, rng);
  for (const Matrix& U : p.lstm.U) {
    for (std::size_t i = 0; i < U.cols(); ++i) {
      for (std::size_t j = 0; j < U.cols(); ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < U.rows(); ++k) s += U(k, i) * U(k, j);
        CHECK(std::abs(s - (i == j ? 1.0 : 0.0)) < 1e-10);
      }
    }
  }
  CHECK(p.lstm.U[0] != p.lstm.U[1]);
}

TEST_CASE("init is reproducible from the seed") {
  const ModelConfig cfg = small_config();
  const DatasetMeta meta{3, 4, 5, {}};
  Rng a(7);
  Rng b(7);
  Rng c(8);
  CHECK(init_params(cfg, meta, a) == init_params(cfg, meta, b));
  CHECK_FALSE(init_params(cfg, meta, a) == init_params(cfg, meta, c));
}

TEST_CASE("tensor views list every parameter once") {
  const ModelConfig cfg = small_config();
  ModelParams p = zero_params(cfg, 3, 4);
  const auto views = tensors(p);
  std::size_t total = 0;
  for (const auto& t : views) {
    CHECK(t.rows * t.cols == t.data.size());
    total += t.data.size();
  }
  const std::size_t want = (4 * 3 + 4) + (4 * 4 + 4) + 4 * (5 * 4 + 5 * 5 + 5) + (3 * 9 + 3);
  CHECK(total == want);
  CHECK(views.front().name == "fc.0.W");
  CHECK(views.back().name == "fusion.b");
}

TEST_CASE("check_params reports the offending tensor") {
  const ModelConfig cfg = small_config();
  ModelParams p = zero_params(cfg, 3, 4);
  p.lstm.U[kForget] = Matrix(5, 4);
  try {
    check_params(p, cfg, 3, 4);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("lstm.U_f") != std::string::npos);
  }
}

TEST_CASE("dense branch examples") {
  ModelConfig cfg = small_config();
  const ModelParams zero = zero_params(cfg, 3, 4);
  CHECK(fc_forward(zero, Activation::Tanh, Vector{1, 2, 3}) == Vector(4, 0.0));

  cfg.m = 1;
  cfg.n_m = 1;
  ModelParams one = zero_params(cfg, 1, 1);
  one.fc[0].W = Matrix::identity(1);
  const Vector out = fc_forward(one, Activation::Tanh, Vector{0.5});
  CHECK(out[0] == doctest::Approx(0.46212).epsilon(1e-5));
  CHECK(fc_forward(one, Activation::Relu, Vector{-0.5}) == Vector{0.0});

  Rng rng(3);
  const ModelParams random = init_params(small_config(), DatasetMeta{3, 4, 5, {}}, rng);
  CHECK(fc_forward(random, Activation::Tanh, Vector{1, -1, 0.5}).size() == 4);
  CHECK_THROWS_AS(fc_forward(random, Activation::Tanh, Vector{1, 2}), ShapeError);
}

TEST_CASE("LSTM with zero parameters yields zero state") {
  const ModelParams p = zero_params(small_config(), 3, 4);
  Matrix seq(3, 4);
  seq(0, 1) = seq(1, 2) = seq(2, 0) = 1.0;
  CHECK(lstm_forward(p, seq, 3) == Vector(5, 0.0));
  CHECK_THROWS_AS(lstm_forward(p, seq, 0), std::invalid_argument);
  CHECK_THROWS_AS(lstm_forward(p, seq, 4), ShapeError);
}

TEST_CASE("LSTM single unit matches direct substitution over two steps") {
  ModelConfig cfg;
  cfg.m = 1;
  cfg.n_m = 1;
  cfg.n_l = 1;
  cfg.n = 1;
  ModelParams p = zero_params(cfg, 1, 2);
  const double Wx[4][2] = {{0.5, -0.2}, {-0.3, 0.4}, {0.8, 0.1}, {0.2, -0.7}};
  const double U[4] = {0.3, -0.6, 0.9, 0.25};
  const double b[4] = {0.1, 0.2, -0.1, 0.05};
  for (std::size_t g = 0; g < 4; ++g) {
    p.lstm.W[g] = Matrix(1, 2, {Wx[g][0], Wx[g][1]});
    p.lstm.U[g] = Matrix(1, 1, {U[g]});
    p.lstm.b[g] = Vector{b[g]};
  }
  // Items [0, 1].
  const Matrix seq(2, 2, {1, 0, 0, 1});

  double h = 0.0;
  double c = 0.0;
  for (int t = 0; t < 2; ++t) {
    const double i = logistic(Wx[0][t] + U[0] * h + b[0]);
    const double f = logistic(Wx[1][t] + U[1] * h + b[1]);
    const double o = logistic(Wx[2][t] + U[2] * h + b[2]);
    const double g = std::tanh(Wx[3][t] + U[3] * h + b[3]);
    c = f * c + i * g;
    h = o * std::tanh(c);
    if (t == 0) {
      CHECK(lstm_forward(p, seq, 1)[0] == doctest::Approx(h).epsilon(1e-14));
    }
  }
  CHECK(lstm_forward(p, seq, 2)[0] == doctest::Approx(h).epsilon(1e-14));
}

TEST_CASE("embedding shape and zero model") {
  const ModelConfig cfg;
  const DatasetMeta meta{10, 12, 15, {}};
  Rng rng(4);
  const ModelParams p = init_params(cfg, meta, rng);
  Rng data_rng(5);
  const auto inst = encode(random_record(data_rng, meta), meta);
  CHECK(embed(p, cfg, inst).size() == 50);
  CHECK(embed(zero_params(cfg, meta.u, meta.r), cfg, inst) == Vector(50, 0.0));
}

TEST_CASE("extra padding rows never change the embedding") {
  const ModelConfig cfg = small_config();
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const DatasetMeta meta{3, 4, 1 + rng.below(6), {}};
    Rng init_rng = rng.child("init", static_cast<std::uint64_t>(trial));
    const ModelParams p = init_params(cfg, meta, init_rng);
    const AttributedSequence rec = random_record(rng, meta);
    DatasetMeta wider = meta;
    wider.t_max += 1 + rng.below(10);
    CHECK(embed(p, cfg, encode(rec, meta)) == embed(p, cfg, encode(rec, wider)));
  }
}

TEST_CASE("branch masking") {
  ModelConfig cfg = small_config();
  const DatasetMeta meta{3, 4, 6, {}};
  Rng rng(7);
  const ModelParams p = init_params(cfg, meta, rng);
  for (int trial = 0; trial < 50; ++trial) {
    AttributedSequence rec = random_record(rng, meta);
    AttributedSequence permuted = rec;
    rng.shuffle(permuted.items);
    AttributedSequence other_attrs = rec;
    for (double& x : other_attrs.attributes) x = rng.normal();

    cfg.branch_mode = BranchMode::AttributesOnly;
    CHECK(embed(p, cfg, encode(rec, meta)) == embed(p, cfg, encode(permuted, meta)));
    cfg.branch_mode = BranchMode::SequenceOnly;
    CHECK(embed(p, cfg, encode(rec, meta)) == embed(p, cfg, encode(other_attrs, meta)));
  }
  // With both branches a different attribute vector moves the embedding.
  cfg.branch_mode = BranchMode::Both;
  AttributedSequence rec = random_record(rng, meta);
  AttributedSequence shifted = rec;
  shifted.attributes[0] += 1.0;
  CHECK(embed(p, cfg, encode(rec, meta)) != embed(p, cfg, encode(shifted, meta)));
}

TEST_CASE("enum parsing round-trips") {
  for (Activation a : {Activation::Tanh, Activation::Relu}) CHECK(parse_activation(to_string(a)) == a);
  for (BranchMode b : {BranchMode::Both, BranchMode::AttributesOnly, BranchMode::SequenceOnly}) {
    CHECK(parse_branch_mode(to_string(b)) == b);
  }
  CHECK_THROWS_AS(parse_activation("sigmoid"), std::invalid_argument);
  ModelConfig bad;
  bad.n = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
