#pragma once

// Attributed-sequence records, one-hot encoding, ingestion, class-disjoint
// splits, pair sampling and the synthetic Markov-chain generator.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "attseq/numkernel.hpp"

namespace attseq {

using ClassId = std::int64_t;
using ItemId = std::uint32_t;

/// Malformed dataset content.  `line()` is 1-based, 0 when not tied to a line.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::size_t line = 0);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AttributedSequence {
  Vector attributes;
  std::vector<ItemId> items;
  std::optional<ClassId> label;

  bool operator==(const AttributedSequence&) const = default;
};

struct DatasetMeta {
  std::size_t u = 0;      // attribute dimension
  std::size_t r = 0;      // item alphabet size
  std::size_t t_max = 0;  // padded sequence length
  std::vector<ClassId> class_ids;  // sorted, unique

  bool operator==(const DatasetMeta&) const = default;
};

/// Overrides read from a sidecar `<dataset>.meta.json`.
struct MetaOverride {
  std::optional<std::size_t> u;
  std::optional<std::size_t> r;
  std::optional<std::size_t> t_max;
};

struct Dataset {
  std::vector<AttributedSequence> records;
  DatasetMeta meta;
};

/// Model-ready record: attributes plus a zero-padded one-hot matrix.
struct EncodedInstance {
  Vector attributes;
  Matrix seq;  // t_max x r
  std::size_t true_len = 0;
};

/// A pair of instances (indices into a record list) with similarity label
/// ell = 0 for same class and ell = 1 for different classes.
struct Triplet {
  std::size_t a = 0;
  std::size_t b = 0;
  int ell = 0;

  bool operator==(const Triplet&) const = default;
};

// --- ingestion ---------------------------------------------------------------

/// Parses every line of a JSONL file; blank lines are skipped.  Does not
/// require any record to be present.
std::vector<AttributedSequence> read_jsonl(const std::filesystem::path& path);

/// Parses JSONL records and infers metadata, honoring a sidecar
/// `<path>.meta.json` when present.
Dataset load_jsonl(const std::filesystem::path& path);

/// Infers metadata from records, applying optional overrides.
DatasetMeta infer_meta(const std::vector<AttributedSequence>& records,
                       const MetaOverride& override_meta = {});

/// Throws DataError if a record does not fit the metadata.
void check_record(const AttributedSequence& rec, const DatasetMeta& meta, std::size_t line = 0);

void write_jsonl(const std::filesystem::path& path, const std::vector<AttributedSequence>& records);
void write_meta_sidecar(const std::filesystem::path& path, const DatasetMeta& meta);
std::filesystem::path meta_sidecar_path(const std::filesystem::path& dataset);

/// Per-dimension z-scoring in place.  Constant dimensions are centered only.
void standardize_attributes(std::vector<AttributedSequence>& records);

// --- encoding ----------------------------------------------------------------

EncodedInstance encode(const AttributedSequence& rec, const DatasetMeta& meta);
std::vector<EncodedInstance> encode_all(const std::vector<AttributedSequence>& records,
                                        const DatasetMeta& meta);
/// Argmax of each non-zero row up to true_len.
std::vector<ItemId> decode(const EncodedInstance& inst);

// --- splitting and sampling --------------------------------------------------

struct ClassSplit {
  std::vector<ClassId> train_classes;
  std::vector<ClassId> oneshot_classes;
  std::vector<AttributedSequence> train_set;
  std::vector<AttributedSequence> oneshot_set;
};

/// Number of classes that go to training: ceil(fraction * n_classes).
std::size_t train_class_count(std::size_t n_classes, double train_fraction);

ClassSplit split_by_class(const std::vector<AttributedSequence>& data, double train_fraction,
                          Rng& rng);

/// Keeps records whose label is in `classes`, preserving order.
std::vector<AttributedSequence> filter_by_class(const std::vector<AttributedSequence>& data,
                                                const std::vector<ClassId>& classes);

/// Samples `n_triplets` pairs; round(n * positive_fraction) are same-class.
std::vector<Triplet> sample_triplets(const std::vector<AttributedSequence>& train_set,
                                     std::size_t n_triplets, Rng& rng,
                                     double positive_fraction = 0.5);

// --- synthetic data ----------------------------------------------------------

struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t per_class = 100;
  std::size_t u = 10;
  std::size_t r = 12;
  std::size_t t_max = 15;
  double attr_noise = 0.05;
  double seq_noise = 0.05;
  std::uint64_t seed = 0;
};

/// Each class gets an attribute centroid in [-1, 1]^u and its own item
/// transition table; records are ordered by class.
std::vector<AttributedSequence> generate_synthetic(const SyntheticSpec& spec);

}  // namespace attseq
