#include "attseq/kernels.hpp"

#include <exception>
#include <limits>

namespace attseq {
namespace {

// Exceptions cannot cross an OpenMP region boundary; park the first one
// and rethrow after the loop.
class ExceptionSlot {
 public:
  template <typename F>
  void run(F&& f) {
    try {
      f();
    } catch (...) {
#pragma omp critical(attseq_exception_slot)
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
};

void check_triplet(const Triplet& t, std::size_t n) {
  if (t.a >= n || t.b >= n) throw std::out_of_range("triplet refers past the instance list");
}

}  // namespace

std::size_t nearest_support(std::span<const double> query, const std::vector<Vector>& support,
                            const std::vector<ClassId>& support_labels, DistanceKind kind) {
  if (support.empty() || support.size() != support_labels.size()) {
    throw ShapeError("support set is empty or labels do not match exemplars");
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < support.size(); ++g) {
    const double d = distance(kind, query, support[g]);
    if (d < best_d || (d == best_d && support_labels[g] < support_labels[best])) {
      best = g;
      best_d = d;
    }
  }
  return best;
}

namespace serial {

std::vector<Vector> embed_all(const ModelParams& params, const ModelConfig& cfg,
                              const std::vector<EncodedInstance>& instances) {
  std::vector<Vector> out(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) out[i] = embed(params, cfg, instances[i]);
  return out;
}

std::vector<double> pair_losses(const ModelParams& params, const ModelConfig& cfg,
                                const std::vector<EncodedInstance>& instances,
                                const std::vector<Triplet>& triplets, double margin,
                                DistanceKind kind) {
  std::vector<double> out(triplets.size());
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const Triplet& t = triplets[k];
    check_triplet(t, instances.size());
    out[k] = pair_loss(params, cfg, instances[t.a], instances[t.b], t.ell, margin, kind);
  }
  return out;
}

std::vector<ClassId> classify_all(const std::vector<Vector>& queries,
                                  const std::vector<Vector>& support,
                                  const std::vector<ClassId>& support_labels, DistanceKind kind) {
  std::vector<ClassId> out(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    out[q] = support_labels[nearest_support(queries[q], support, support_labels, kind)];
  }
  return out;
}

}  // namespace serial

namespace parallel {

std::vector<Vector> embed_all(const ModelParams& params, const ModelConfig& cfg,
                              const std::vector<EncodedInstance>& instances) {
  std::vector<Vector> out(instances.size());
  ExceptionSlot slot;
  const auto n = static_cast<std::ptrdiff_t>(instances.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    slot.run([&] { out[i] = embed(params, cfg, instances[i]); });
  }
  slot.rethrow();
  return out;
}

std::vector<double> pair_losses(const ModelParams& params, const ModelConfig& cfg,
                                const std::vector<EncodedInstance>& instances,
                                const std::vector<Triplet>& triplets, double margin,
                                DistanceKind kind) {
  std::vector<double> out(triplets.size());
  ExceptionSlot slot;
  const auto n = static_cast<std::ptrdiff_t>(triplets.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    slot.run([&] {
      const Triplet& t = triplets[k];
      check_triplet(t, instances.size());
      out[k] = pair_loss(params, cfg, instances[t.a], instances[t.b], t.ell, margin, kind);
    });
  }
  slot.rethrow();
  return out;
}

std::vector<ClassId> classify_all(const std::vector<Vector>& queries,
                                  const std::vector<Vector>& support,
                                  const std::vector<ClassId>& support_labels, DistanceKind kind) {
  std::vector<ClassId> out(queries.size());
  ExceptionSlot slot;
  const auto n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < n; ++q) {
    slot.run([&] {
      out[q] = support_labels[nearest_support(queries[q], support, support_labels, kind)];
    });
  }
  slot.rethrow();
  return out;
}

}  // namespace parallel

double ordered_mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

}  // namespace attseq
