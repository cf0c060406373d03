#include "attseq/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

namespace attseq {
namespace {

using nlohmann::json;

std::string at_line(std::size_t line) {
  return line > 0 ? "line " + std::to_string(line) + ": " : std::string();
}

AttributedSequence parse_record(const std::string& text, std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("invalid JSON (") + e.what() + ")", line);
  }
  if (!j.is_object()) throw DataError("record is not a JSON object", line);
  if (!j.contains("attrs") || !j["attrs"].is_array()) {
    throw DataError("missing \"attrs\" array", line);
  }
  if (!j.contains("seq") || !j["seq"].is_array()) {
    throw DataError("missing \"seq\" array", line);
  }

  AttributedSequence rec;
  for (const auto& a : j["attrs"]) {
    if (!a.is_number()) throw DataError("non-numeric attribute", line);
    rec.attributes.push_back(a.get<double>());
  }
  if (!all_finite(rec.attributes)) throw DataError("non-finite attribute", line);
  for (const auto& s : j["seq"]) {
    if (!s.is_number_integer() || s.get<std::int64_t>() < 0) {
      throw DataError("item ids must be non-negative integers", line);
    }
    rec.items.push_back(static_cast<ItemId>(s.get<std::int64_t>()));
  }
  if (rec.items.empty()) throw DataError("empty sequence", line);
  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_number_integer()) throw DataError("label must be an integer", line);
    rec.label = j["label"].get<ClassId>();
  }
  return rec;
}

std::optional<std::size_t> optional_size(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number_unsigned()) {
    throw DataError(std::string("meta field \"") + key + "\" must be a positive integer");
  }
  return j[key].get<std::size_t>();
}

}  // namespace

DataError::DataError(const std::string& what, std::size_t line)
    : std::runtime_error(at_line(line) + what), line_(line) {}

static std::vector<AttributedSequence> read_jsonl_with_lines(const std::filesystem::path& path,
                                                     std::vector<std::size_t>* lines) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::vector<AttributedSequence> records;
  std::string text;
  std::size_t line = 0;
  std::size_t u = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto rec = parse_record(text, line);
    if (records.empty()) {
      u = rec.attributes.size();
      if (u == 0) throw DataError("empty attribute vector", line);
    } else if (rec.attributes.size() != u) {
      throw DataError("attribute length " + std::to_string(rec.attributes.size()) +
                          " differs from " + std::to_string(u),
                      line);
    }
    records.push_back(std::move(rec));
    if (lines) lines->push_back(line);
  }
  if (in.bad()) throw IoError("read error on " + path.string());
  return records;
}

std::vector<AttributedSequence> read_jsonl(const std::filesystem::path& path) {
  return read_jsonl_with_lines(path, nullptr);
}

std::filesystem::path meta_sidecar_path(const std::filesystem::path& dataset) {
  return dataset.string() + ".meta.json";
}

static DatasetMeta infer_meta_unchecked(const std::vector<AttributedSequence>& records,
                                 const MetaOverride& override_meta) {
  if (records.empty()) throw DataError("no records");
  DatasetMeta meta;
  meta.u = records.front().attributes.size();
  std::size_t max_item = 0;
  std::set<ClassId> classes;
  for (const auto& rec : records) {
    meta.t_max = std::max(meta.t_max, rec.items.size());
    for (ItemId item : rec.items) max_item = std::max<std::size_t>(max_item, item);
    if (rec.label) classes.insert(*rec.label);
  }
  meta.r = max_item + 1;
  meta.class_ids.assign(classes.begin(), classes.end());

  if (override_meta.u) {
    if (*override_meta.u != meta.u) {
      throw DataError("meta declares u=" + std::to_string(*override_meta.u) +
                      " but records have u=" + std::to_string(meta.u));
    }
  }
  if (override_meta.r) {
    if (*override_meta.r == 0) throw DataError("meta declares r=0");
    meta.r = *override_meta.r;
  }
  if (override_meta.t_max) {
    if (*override_meta.t_max < meta.t_max) {
      throw DataError("meta declares t_max=" + std::to_string(*override_meta.t_max) +
                      " below observed length " + std::to_string(meta.t_max));
    }
    meta.t_max = *override_meta.t_max;
  }
  return meta;
}

DatasetMeta infer_meta(const std::vector<AttributedSequence>& records,
                       const MetaOverride& override_meta) {
  DatasetMeta meta = infer_meta_unchecked(records, override_meta);
  for (std::size_t i = 0; i < records.size(); ++i) check_record(records[i], meta);
  return meta;
}

void check_record(const AttributedSequence& rec, const DatasetMeta& meta, std::size_t line) {
  if (rec.attributes.size() != meta.u) {
    throw DataError("attribute length " + std::to_string(rec.attributes.size()) +
                        " but u=" + std::to_string(meta.u),
                    line);
  }
  if (rec.items.empty()) throw DataError("empty sequence", line);
  if (rec.items.size() > meta.t_max) {
    throw DataError("sequence length " + std::to_string(rec.items.size()) + " exceeds t_max=" +
                        std::to_string(meta.t_max),
                    line);
  }
  for (ItemId item : rec.items) {
    if (item >= meta.r) {
      throw DataError("item id " + std::to_string(item) + " >= r=" + std::to_string(meta.r),
                      line);
    }
  }
}

Dataset load_jsonl(const std::filesystem::path& path) {
  Dataset ds;
  std::vector<std::size_t> lines;
  ds.records = read_jsonl_with_lines(path, &lines);
  if (ds.records.empty()) throw DataError("no records in " + path.string());

  MetaOverride over;
  const auto sidecar = meta_sidecar_path(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream in(sidecar);
    if (!in) throw IoError("cannot open " + sidecar.string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw DataError("invalid meta sidecar " + sidecar.string() + ": " + e.what());
    }
    over.u = optional_size(j, "u");
    over.r = optional_size(j, "r");
    over.t_max = optional_size(j, "t_max");
  }

  ds.meta = infer_meta_unchecked(ds.records, over);
  for (std::size_t i = 0; i < ds.records.size(); ++i) check_record(ds.records[i], ds.meta, lines[i]);
  return ds;
}

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<AttributedSequence>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& rec : records) {
    json j;
    j["attrs"] = rec.attributes;
    j["seq"] = rec.items;
    if (rec.label) j["label"] = *rec.label;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write error on " + path.string());
}

void write_meta_sidecar(const std::filesystem::path& path, const DatasetMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  json j{{"u", meta.u}, {"r", meta.r}, {"t_max", meta.t_max}};
  out << j.dump() << '\n';
  if (!out) throw IoError("write error on " + path.string());
}

void standardize_attributes(std::vector<AttributedSequence>& records) {
  if (records.empty()) return;
  const std::size_t u = records.front().attributes.size();
  const double n = static_cast<double>(records.size());
  for (std::size_t k = 0; k < u; ++k) {
    double mean = 0.0;
    for (const auto& rec : records) mean += rec.attributes[k];
    mean /= n;
    double var = 0.0;
    for (const auto& rec : records) {
      const double d = rec.attributes[k] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / n);
    for (auto& rec : records) {
      rec.attributes[k] -= mean;
      if (sd > 0.0) rec.attributes[k] /= sd;
    }
  }
}

EncodedInstance encode(const AttributedSequence& rec, const DatasetMeta& meta) {
  check_record(rec, meta);
  EncodedInstance inst;
  inst.attributes = rec.attributes;
  inst.seq = Matrix(meta.t_max, meta.r);
  inst.true_len = rec.items.size();
  for (std::size_t t = 0; t < rec.items.size(); ++t) inst.seq(t, rec.items[t]) = 1.0;
  return inst;
}

std::vector<EncodedInstance> encode_all(const std::vector<AttributedSequence>& records,
                                        const DatasetMeta& meta) {
  std::vector<EncodedInstance> out;
  out.reserve(records.size());
  for (const auto& rec : records) out.push_back(encode(rec, meta));
  return out;
}

std::vector<ItemId> decode(const EncodedInstance& inst) {
  std::vector<ItemId> items;
  for (std::size_t t = 0; t < inst.true_len; ++t) {
    const auto row = inst.seq.row(t);
    const auto it = std::max_element(row.begin(), row.end());
    if (it == row.end() || *it == 0.0) break;
    items.push_back(static_cast<ItemId>(it - row.begin()));
  }
  return items;
}

std::size_t train_class_count(std::size_t n_classes, double train_fraction) {
  // The epsilon absorbs representation error, e.g. 0.6 * 60 = 35.999...
  return static_cast<std::size_t>(
      std::ceil(train_fraction * static_cast<double>(n_classes) - 1e-9));
}

ClassSplit split_by_class(const std::vector<AttributedSequence>& data, double train_fraction,
                          Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
  std::set<ClassId> class_set;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].label) throw DataError("record " + std::to_string(i) + " has no label");
    class_set.insert(*data[i].label);
  }
  if (class_set.size() < 2) {
    throw DataError("class split needs at least 2 classes, found " +
                    std::to_string(class_set.size()));
  }
  std::vector<ClassId> classes(class_set.begin(), class_set.end());
  const std::size_t n_train = train_class_count(classes.size(), train_fraction);
  if (n_train == 0 || n_train >= classes.size()) {
    throw DataError("fraction " + std::to_string(train_fraction) + " of " +
                    std::to_string(classes.size()) + " classes leaves one side empty");
  }
  rng.shuffle(classes);

  ClassSplit split;
  split.train_classes.assign(classes.begin(), classes.begin() + n_train);
  split.oneshot_classes.assign(classes.begin() + n_train, classes.end());
  std::sort(split.train_classes.begin(), split.train_classes.end());
  std::sort(split.oneshot_classes.begin(), split.oneshot_classes.end());
  split.train_set = filter_by_class(data, split.train_classes);
  split.oneshot_set = filter_by_class(data, split.oneshot_classes);
  return split;
}

std::vector<AttributedSequence> filter_by_class(const std::vector<AttributedSequence>& data,
                                                const std::vector<ClassId>& classes) {
  const std::set<ClassId> keep(classes.begin(), classes.end());
  std::vector<AttributedSequence> out;
  for (const auto& rec : data) {
    if (rec.label && keep.contains(*rec.label)) out.push_back(rec);
  }
  return out;
}

std::vector<Triplet> sample_triplets(const std::vector<AttributedSequence>& train_set,
                                     std::size_t n_triplets, Rng& rng,
                                     double positive_fraction) {
  if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0)) {
    throw std::invalid_argument("positive fraction must lie in [0, 1]");
  }
  std::map<ClassId, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (!train_set[i].label) throw DataError("record " + std::to_string(i) + " has no label");
    by_class[*train_set[i].label].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> all_groups;
  std::vector<const std::vector<std::size_t>*> multi_groups;
  for (const auto& [cls, members] : by_class) {
    all_groups.push_back(&members);
    if (members.size() >= 2) multi_groups.push_back(&members);
  }

  const auto n_pos = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_triplets) * positive_fraction));
  const std::size_t n_neg = n_triplets - n_pos;
  if (n_pos > 0 && multi_groups.empty()) {
    throw DataError("positive pairs need a class with at least 2 instances");
  }
  if (n_neg > 0 && all_groups.size() < 2) {
    throw DataError("negative pairs need at least 2 classes");
  }

  std::vector<Triplet> out;
  out.reserve(n_triplets);
  for (std::size_t k = 0; k < n_pos; ++k) {
    const auto& members = *multi_groups[rng.below(multi_groups.size())];
    const std::size_t i = rng.below(members.size());
    std::size_t j = rng.below(members.size() - 1);
    if (j >= i) ++j;
    out.push_back({members[i], members[j], 0});
  }
  for (std::size_t k = 0; k < n_neg; ++k) {
    const std::size_t ci = rng.below(all_groups.size());
    std::size_t cj = rng.below(all_groups.size() - 1);
    if (cj >= ci) ++cj;
    const auto& gi = *all_groups[ci];
    const auto& gj = *all_groups[cj];
    out.push_back({gi[rng.below(gi.size())], gj[rng.below(gj.size())], 1});
  }
  rng.shuffle(out);
  return out;
}

namespace {

// Sharpened Dirichlet(1) draw: heavy mass on a few items makes the chains
// of different classes distinguishable.
Vector random_distribution(Rng& rng, std::size_t n) {
  Vector w(n);
  double total = 0.0;
  for (double& x : w) {
    double e;
    do {
      e = rng.uniform();
    } while (e <= 0.0);
    x = std::pow(-std::log(e), 3.0);
    total += x;
  }
  for (double& x : w) x /= total;
  return w;
}

ItemId draw_categorical(Rng& rng, const Vector& probs) {
  const double target = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (target < acc) return static_cast<ItemId>(k);
  }
  return static_cast<ItemId>(probs.size() - 1);
}

}  // namespace

std::vector<AttributedSequence> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw std::invalid_argument("synthetic: classes must be >= 2");
  if (spec.per_class < 1) throw std::invalid_argument("synthetic: per_class must be >= 1");
  if (spec.u < 1 || spec.r < 1 || spec.t_max < 1) {
    throw std::invalid_argument("synthetic: u, r and t_max must be >= 1");
  }
  if (!(spec.attr_noise >= 0.0) || !std::isfinite(spec.attr_noise)) {
    throw std::invalid_argument("synthetic: attr_noise must be finite and >= 0");
  }
  if (!(spec.seq_noise >= 0.0 && spec.seq_noise <= 1.0)) {
    throw std::invalid_argument("synthetic: seq_noise must lie in [0, 1]");
  }

  const Rng root(spec.seed);
  const std::size_t min_len = (spec.t_max + 1) / 2;
  std::vector<AttributedSequence> out(spec.classes * spec.per_class);

  // Each class draws from its own child stream, so classes are independent
  // of generation order.
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < spec.classes; ++c) {
    Rng rng = root.child("class", c);
    Vector centroid(spec.u);
    for (double& x : centroid) x = rng.uniform(-1.0, 1.0);
    const Vector start = random_distribution(rng, spec.r);
    std::vector<Vector> transition;
    transition.reserve(spec.r);
    for (std::size_t k = 0; k < spec.r; ++k) transition.push_back(random_distribution(rng, spec.r));

    for (std::size_t n = 0; n < spec.per_class; ++n) {
      AttributedSequence& rec = out[c * spec.per_class + n];
      rec.label = static_cast<ClassId>(c);
      rec.attributes.resize(spec.u);
      for (std::size_t k = 0; k < spec.u; ++k) {
        rec.attributes[k] = centroid[k] + spec.attr_noise * rng.normal();
      }
      const std::size_t len = min_len + rng.below(spec.t_max - min_len + 1);
      rec.items.resize(len);
      ItemId prev = 0;
      for (std::size_t t = 0; t < len; ++t) {
        ItemId item = draw_categorical(rng, t == 0 ? start : transition[prev]);
        if (rng.bernoulli(spec.seq_noise)) item = static_cast<ItemId>(rng.below(spec.r));
        rec.items[t] = item;
        prev = item;
      }
    }
  }
  return out;
}

}  // namespace attseq
