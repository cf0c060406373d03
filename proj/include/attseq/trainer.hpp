#pragma once

// Per-pair SGD over similarity triplets with weight decay and
// validation-based early stopping, plus checkpoint I/O.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "attseq/backprop.hpp"
#include "attseq/corenet.hpp"
#include "attseq/data.hpp"

namespace attseq {

/// Raised when a loss or parameter becomes non-finite.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(std::size_t epoch, std::size_t triplet_index, const std::string& detail);
  std::size_t epoch() const { return epoch_; }
  std::size_t triplet_index() const { return triplet_index_; }

 private:
  std::size_t epoch_;
  std::size_t triplet_index_;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double lr = 0.01;
  std::size_t max_epochs = 100;
  double converge_eps = 1e-4;
  double margin = 1.0;
  double l2 = 1e-4;
  double val_fraction = 0.2;
  std::size_t patience = 5;
  DistanceKind distance = DistanceKind::Euclidean;
  GradMode grad_mode = GradMode::Exact;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

enum class StopReason { Converged, Patience, MaxEpochs };
std::string_view to_string(StopReason r);

struct TrainReport {
  double initial_val_loss = 0.0;
  std::vector<double> train_loss;  // mean loss over the epoch's updates
  std::vector<double> val_loss;    // after each epoch
  std::size_t best_epoch = 0;      // 1-based; 0 when no epoch ran
  StopReason stop_reason = StopReason::MaxEpochs;
  std::size_t degenerate_pairs = 0;  // updates skipped at d = 0
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

/// Train/validation split of triplet indices: (train, validation).  With a
/// single triplet it is used for both.
std::pair<std::vector<Triplet>, std::vector<Triplet>> holdout_split(
    const std::vector<Triplet>& triplets, double val_fraction, Rng& rng);

/// theta -= lr * (grad + l2 * theta); biases are not decayed.
void sgd_step(ModelParams& params, const Gradients& grads, double lr, double l2);

/// Returns the parameters of the epoch with the lowest validation loss.
TrainResult train(ModelParams params, const ModelConfig& cfg,
                  const std::vector<EncodedInstance>& instances,
                  const std::vector<Triplet>& triplets, const TrainConfig& train_cfg);

void write_metrics_csv(const std::filesystem::path& path, const TrainReport& report);

struct Checkpoint {
  ModelParams params;
  ModelConfig model;
  DatasetMeta meta;
  TrainConfig train;
  bool standardize = false;

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace attseq
