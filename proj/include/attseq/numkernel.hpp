#pragma once

// Dense row-major arithmetic, activations and a splittable seeded RNG.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace attseq {

/// Thrown when tensor shapes do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  std::string shape_str() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// y = M x
Vector matvec(const Matrix& m, std::span<const double> v);
// y = M^T x
Vector matvec_transposed(const Matrix& m, std::span<const double> v);
// y += M x
void matvec_add(const Matrix& m, std::span<const double> v, std::span<double> y);
// y += M^T x
void matvec_transposed_add(const Matrix& m, std::span<const double> v, std::span<double> y);
// M += a b^T
void outer_add(Matrix& m, std::span<const double> a, std::span<const double> b);

void axpy(double alpha, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v);

double sigmoid(double z);
double relu(double z);

Vector tanh(std::span<const double> v);
Vector sigmoid(std::span<const double> v);
Vector relu(std::span<const double> v);

bool all_finite(std::span<const double> v);

/// Seeded generator over std::mt19937_64.  `child(label)` derives a new
/// stream from the construction seed and the label only, so consumers of
/// different children never perturb one another.  Real-valued draws are
/// converted by hand because the std distributions are not bit-stable
/// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  Rng child(std::string_view label) const;
  Rng child(std::string_view label, std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer on [0, n).
  std::size_t below(std::size_t n);
  double normal();
  bool bernoulli(double p);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Matrix with i.i.d. entries uniform on [-bound, bound].
Matrix uniform_init(Rng& rng, std::size_t rows, std::size_t cols, double bound);

/// Glorot bound sqrt(6 / (fan_in + fan_out)).
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

}  // namespace attseq
