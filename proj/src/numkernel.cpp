#include "attseq/numkernel.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace attseq {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": length " + std::to_string(a) + " vs " +
                     std::to_string(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix " + shape_str() + " given " + std::to_string(data_.size()) +
                     " values");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_str() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

void matvec_add(const Matrix& m, std::span<const double> v, std::span<double> y) {
  if (m.cols() != v.size() || m.rows() != y.size()) {
    throw ShapeError("matvec: matrix " + m.shape_str() + " with vector (" +
                     std::to_string(v.size()) + ") into (" + std::to_string(y.size()) + ")");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double acc = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) acc += row[c] * v[c];
    y[r] += acc;
  }
}

Vector matvec(const Matrix& m, std::span<const double> v) {
  Vector y(m.rows(), 0.0);
  matvec_add(m, v, y);
  return y;
}

void matvec_transposed_add(const Matrix& m, std::span<const double> v, std::span<double> y) {
  if (m.rows() != v.size() || m.cols() != y.size()) {
    throw ShapeError("matvec_transposed: matrix " + m.shape_str() + " with vector (" +
                     std::to_string(v.size()) + ") into (" + std::to_string(y.size()) + ")");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (v[r] == 0.0) continue;
    const auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) y[c] += row[c] * v[r];
  }
}

Vector matvec_transposed(const Matrix& m, std::span<const double> v) {
  Vector y(m.cols(), 0.0);
  matvec_transposed_add(m, v, y);
  return y;
}

void outer_add(Matrix& m, std::span<const double> a, std::span<const double> b) {
  if (m.rows() != a.size() || m.cols() != b.size()) {
    throw ShapeError("outer_add: matrix " + m.shape_str() + " with (" +
                     std::to_string(a.size()) + ") x (" + std::to_string(b.size()) + ")");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (a[r] == 0.0) continue;
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += a[r] * b[c];
  }
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same(x.size(), y.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(std::span<const double> v) { return dot(v, v); }

double sigmoid(double z) {
  // Split by sign so exp never overflows.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double relu(double z) { return z > 0.0 ? z : 0.0; }

Vector tanh(std::span<const double> v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  return out;
}

Vector sigmoid(std::span<const double> v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
  return out;
}

Vector relu(std::span<const double> v) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = relu(v[i]);
  return out;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::child(std::string_view label) const {
  return Rng(splitmix64(seed_ ^ splitmix64(fnv1a(label))));
}

Rng Rng::child(std::string_view label, std::uint64_t index) const {
  return Rng(splitmix64(seed_ ^ splitmix64(fnv1a(label) + splitmix64(index))));
}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: empty range");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

double Rng::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

Matrix uniform_init(Rng& rng, std::size_t rows, std::size_t cols, double bound) {
  if (!(bound > 0.0) || !std::isfinite(bound)) {
    throw std::invalid_argument("uniform_init: bound must be positive, got " +
                                std::to_string(bound));
  }
  Matrix m(rows, cols);
  for (double& x : m.values()) x = rng.uniform(-bound, bound);
  return m;
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace attseq
