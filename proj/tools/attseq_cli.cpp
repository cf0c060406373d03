// attseq: generate data, train, gradient-check, evaluate and export
// embeddings for the attributed-sequence one-shot learner.
//
// Exit codes: 0 success, 1 usage, 2 I/O or malformed input, 3 training
// failure, 4 gradient check failure, 5 artifact mismatch.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "attseq/gradcheck.hpp"
#include "attseq/kernels.hpp"
#include "attseq/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace attseq;

namespace {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kIo = 2,
  kTrainingFailed = 3,
  kGradcheckFailed = 4,
  kMismatch = 5,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Reads `--config file.json`: an object whose keys are long flag names
/// (dashes or underscores) for the selected subcommand.  A nested object
/// keyed by a subcommand name applies to that subcommand only.  Flags given
/// on the command line take priority.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* app) : app_(app) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const auto& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        j[name] = opt->as<std::string>();
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config must be a JSON object");
    std::vector<std::string> selected;
    for (const CLI::App* sub : app_->get_subcommands()) selected.push_back(sub->get_name());

    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        for (const auto& [inner_key, inner_value] : value.items()) {
          items.push_back(make_item({key}, inner_key, inner_value));
        }
      } else {
        items.push_back(make_item(selected, key, value));
      }
    }
    return items;
  }

 private:
  static CLI::ConfigItem make_item(std::vector<std::string> parents, std::string name,
                                   const nlohmann::json& value) {
    CLI::ConfigItem item;
    item.parents = std::move(parents);
    item.name = std::move(name);
    std::replace(item.name.begin(), item.name.end(), '_', '-');
    auto as_input = [](const nlohmann::json& v) {
      return v.is_string() ? v.get<std::string>() : v.dump();
    };
    if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + as_input(v);
      item.inputs.push_back(joined);
    } else {
      item.inputs.push_back(as_input(value));
    }
    return item;
  }

  const CLI::App* app_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write error on " + path.string());
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(part, &pos);
    } catch (const std::exception&) {
      throw UsageError("not an integer list: " + text);
    }
    if (pos != part.size() || v <= 0) throw UsageError("not a positive integer list: " + text);
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw UsageError("empty integer list");
  return out;
}

/// Encoding metadata for evaluating `records` with a trained model.
DatasetMeta eval_meta(const Checkpoint& ckpt, const std::vector<AttributedSequence>& records) {
  DatasetMeta meta = ckpt.meta;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.attributes.size() != meta.u) {
      throw ArtifactMismatch("dataset has u=" + std::to_string(rec.attributes.size()) +
                             " but the checkpoint was trained with u=" + std::to_string(meta.u));
    }
    for (ItemId item : rec.items) {
      if (item >= meta.r) {
        throw ArtifactMismatch("record " + std::to_string(i) + " has item " +
                               std::to_string(item) + " outside the checkpoint alphabet r=" +
                               std::to_string(meta.r));
      }
    }
    // Padding does not change embeddings, so longer sequences only widen t_max.
    meta.t_max = std::max(meta.t_max, rec.items.size());
  }
  return meta;
}

// --- gen ---------------------------------------------------------------------

struct GenArgs {
  fs::path out;
  SyntheticSpec spec;
};

int run_gen(const GenArgs& a) {
  const auto records = generate_synthetic(a.spec);
  write_jsonl(a.out, records);
  const auto meta = infer_meta(records, {a.spec.u, a.spec.r, a.spec.t_max});
  write_meta_sidecar(meta_sidecar_path(a.out), meta);
  std::printf("wrote %zu records to %s\n", records.size(), a.out.string().c_str());
  std::printf("classes=%zu per_class=%zu u=%zu r=%zu t_max=%zu\n", a.spec.classes,
              a.spec.per_class, meta.u, meta.r, meta.t_max);
  return kOk;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  fs::path data;
  fs::path out;
  fs::path metrics;
  fs::path manifest;
  double train_fraction = 0.6;
  bool standardize = false;
  std::string distance = "euclidean";
  std::string grad_mode = "exact";
  std::string activation = "tanh";
  std::string branch_mode = "both";
  PipelineConfig pipeline;
};

Dataset load_for_training(const fs::path& path, bool standardize) {
  Dataset ds = load_jsonl(path);
  if (standardize) standardize_attributes(ds.records);
  return ds;
}

int run_train(TrainArgs a) {
  a.pipeline.train.distance = parse_distance(a.distance);
  a.pipeline.train.grad_mode = parse_grad_mode(a.grad_mode);
  a.pipeline.model.activation = parse_activation(a.activation);
  a.pipeline.model.branch_mode = parse_branch_mode(a.branch_mode);
  a.pipeline.model.validate();
  a.pipeline.train.validate();
  if (a.metrics.empty()) a.metrics = a.out.string() + ".metrics.csv";
  if (a.manifest.empty()) a.manifest = a.out.string() + ".split.json";

  const Dataset ds = load_for_training(a.data, a.standardize);
  const SplitManifest manifest = make_manifest(ds.records, a.train_fraction, a.pipeline.train.seed);
  const TrainResult result = train_on_split(ds.records, ds.meta, manifest, a.pipeline);

  save_checkpoint({result.params, a.pipeline.model, ds.meta, a.pipeline.train, a.standardize},
                  a.out);
  write_metrics_csv(a.metrics, result.report);
  save_manifest(manifest, a.manifest);

  const auto& r = result.report;
  std::printf("train classes: %zu  one-shot classes: %zu\n", manifest.train_classes.size(),
              manifest.oneshot_classes.size());
  std::printf("triplets: %zu train / %zu validation\n", r.n_train, r.n_val);
  std::printf("distance: %s  grad_mode: %s\n", a.distance.c_str(),
              std::string(to_string(a.pipeline.train.grad_mode)).c_str());
  std::printf("epochs: %zu  best_epoch: %zu  stop: %s\n", r.val_loss.size(), r.best_epoch,
              std::string(to_string(r.stop_reason)).c_str());
  std::printf("val_loss: initial %.6g  best %.6g\n", r.initial_val_loss,
              r.best_epoch > 0 ? r.val_loss[r.best_epoch - 1] : r.initial_val_loss);
  if (r.degenerate_pairs > 0) {
    std::printf("skipped %zu dissimilar pairs at zero distance\n", r.degenerate_pairs);
  }
  std::printf("checkpoint: %s\nmetrics: %s\nmanifest: %s\n", a.out.string().c_str(),
              a.metrics.string().c_str(), a.manifest.string().c_str());
  return kOk;
}

// --- gradcheck ---------------------------------------------------------------

// "1e-4" rather than printf's "0.0001".
std::string format_tolerance(double tol) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", tol);
  std::string plain = buf;
  std::snprintf(buf, sizeof buf, "%.15e", tol);
  std::string sci = buf;
  const auto e = sci.find('e');
  std::string mantissa = sci.substr(0, e);
  while (mantissa.back() == '0') mantissa.pop_back();
  if (mantissa.back() == '.') mantissa.pop_back();
  const int exponent = std::stoi(sci.substr(e + 1));
  sci = mantissa + "e" + std::to_string(exponent);
  return sci.size() < plain.size() ? sci : plain;
}

struct GradcheckArgs {
  std::size_t trials = 20;
  std::uint64_t seed = 1;
  std::string grad_mode = "exact";
  double step = 1e-5;
  double tolerance = 1e-4;
};

int run_gradcheck_cmd(const GradcheckArgs& a) {
  const GradMode mode = parse_grad_mode(a.grad_mode);
  const GradCheckResult r = run_gradcheck(a.trials, a.seed, mode, a.step);
  std::printf("trials: %zu  coordinates: %zu  step: %g\n", r.trials, r.coordinates, a.step);
  std::printf("max_rel_err: %.6e (trial %zu, %s[%zu], analytic %.12e, numeric %.12e)\n",
              r.max_rel_err, r.worst_trial, r.worst_tensor.c_str(), r.worst_index,
              r.worst_analytic, r.worst_numeric);
  if (mode == GradMode::Literal) {
    std::printf("EXEMPT grad-mode paper-literal is not an exact derivative; errors are informational\n");
    return kOk;
  }
  if (r.max_rel_err < a.tolerance) {
    std::printf("PASS max_rel_err < %s\n", format_tolerance(a.tolerance).c_str());
    return kOk;
  }
  std::printf("FAIL max_rel_err >= %s at %s[%zu]: analytic %.12e numeric %.12e\n",
              format_tolerance(a.tolerance).c_str(),
              r.worst_tensor.c_str(), r.worst_index, r.worst_analytic, r.worst_numeric);
  return kGradcheckFailed;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  fs::path checkpoint;
  fs::path data;
  fs::path manifest;
  fs::path out;
  fs::path csv;
  std::size_t G = 4;
  std::size_t queries = 2000;
  std::size_t runs = 10;
  std::string distance;
  std::string sweep;
  std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& a) {
  if (a.queries == 0) throw UsageError("--queries must be >= 1");
  if (a.runs == 0) throw UsageError("--runs must be >= 1");
  if (a.G == 0) throw UsageError("--g must be >= 1");
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  auto records = read_jsonl(a.data);
  if (ckpt.standardize) standardize_attributes(records);
  const SplitManifest manifest = load_manifest(a.manifest);
  check_manifest(manifest, records);
  const DatasetMeta meta = eval_meta(ckpt, records);
  const DistanceKind kind = a.distance.empty() ? ckpt.train.distance : parse_distance(a.distance);

  if (!a.sweep.empty()) {
    const auto counts = parse_size_list(a.sweep);
    std::string csv = "triplets," + eval_csv_header() + "\n";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t n : counts) {
      PipelineConfig cfg{ckpt.model, ckpt.train, n, 0.5};
      cfg.train.distance = kind;
      const TrainResult trained = train_on_split(records, meta, manifest, cfg);
      const EvalReport report = evaluate_on_split(trained.params, ckpt.model, kind, records, meta,
                                                  manifest, a.G, a.queries, a.runs, a.seed);
      csv += std::to_string(n) + "," + eval_csv_row(report) + "\n";
      rows.push_back({{"triplets", n}, {"median", report.median}, {"p25", report.p25},
                      {"p75", report.p75}, {"epochs", trained.report.val_loss.size()}});
      std::printf("triplets %zu: median %.4f [p25 %.4f, p75 %.4f]\n", n, report.median,
                  report.p25, report.p75);
    }
    if (!a.csv.empty()) write_text(a.csv, csv);
    if (!a.out.empty()) write_text(a.out, rows.dump(2) + "\n");
    if (a.csv.empty() && a.out.empty()) std::fputs(csv.c_str(), stdout);
    return kOk;
  }

  const EvalReport report = evaluate_on_split(ckpt.params, ckpt.model, kind, records, meta,
                                              manifest, a.G, a.queries, a.runs, a.seed);
  const std::string json = eval_report_json(report) + "\n";
  if (!a.out.empty()) write_text(a.out, json);
  if (!a.csv.empty()) write_text(a.csv, eval_csv_header() + "\n" + eval_csv_row(report) + "\n");
  std::fputs(json.c_str(), stdout);
  return kOk;
}

// --- embed -------------------------------------------------------------------

struct EmbedArgs {
  fs::path checkpoint;
  fs::path data;
  fs::path out;
};

int run_embed(const EmbedArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  auto records = read_jsonl(a.data);
  if (ckpt.standardize) standardize_attributes(records);
  const DatasetMeta meta = eval_meta(ckpt, records);
  const auto embeddings = parallel::embed_all(ckpt.params, ckpt.model, encode_all(records, meta));

  std::string csv = "label";
  for (std::size_t k = 0; k < ckpt.model.n; ++k) csv += ",e" + std::to_string(k);
  csv += "\n";
  char buf[64];
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label) csv += std::to_string(*records[i].label);
    for (double x : embeddings[i]) {
      std::snprintf(buf, sizeof buf, ",%.17g", x);
      csv += buf;
    }
    csv += "\n";
  }
  write_text(a.out, csv);
  std::printf("wrote %zu embeddings of width %zu to %s\n", records.size(), ckpt.model.n,
              a.out.string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-shot learning on attributed sequences"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "JSON file of flag values; command-line flags win");
  app.config_formatter(std::make_shared<JsonConfig>(&app));

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic JSONL dataset");
  gen_cmd->add_option("--out", gen.out, "Output JSONL path")->required();
  gen_cmd->add_option("--classes", gen.spec.classes, "Number of classes")
      ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20))
      ->capture_default_str();
  gen_cmd->add_option("--per-class", gen.spec.per_class, "Records per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen_cmd->add_option("--u", gen.spec.u, "Attribute dimension")->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--r", gen.spec.r, "Item alphabet size")->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--t-max", gen.spec.t_max, "Maximum sequence length")->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--attr-noise", gen.spec.attr_noise, "Attribute noise std")->check(CLI::NonNegativeNumber)->capture_default_str();
  gen_cmd->add_option("--seq-noise", gen.spec.seq_noise, "Probability of a uniform random item")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.spec.seed, "Random seed")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train on the training classes of a dataset");
  train_cmd->add_option("--data", tr.data, "Dataset JSONL")->required();
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--metrics", tr.metrics, "Metrics CSV (default <out>.metrics.csv)");
  train_cmd->add_option("--manifest", tr.manifest, "Split manifest (default <out>.split.json)");
  train_cmd->add_option("--train-fraction", tr.train_fraction, "Fraction of classes used for training")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  train_cmd->add_option("--triplets", tr.pipeline.n_triplets, "Number of sampled pairs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--positive-fraction", tr.pipeline.positive_fraction, "Share of same-class pairs")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  train_cmd->add_option("--distance", tr.distance, "euclidean | manhattan")
      ->check(CLI::IsMember({"euclidean", "manhattan"}))
      ->capture_default_str();
  train_cmd->add_option("--grad-mode", tr.grad_mode, "exact | paper-literal")
      ->check(CLI::IsMember({"exact", "paper-literal"}))
      ->capture_default_str();
  train_cmd->add_option("--lr", tr.pipeline.train.lr, "Learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", tr.pipeline.train.max_epochs, "Maximum epochs")->capture_default_str();
  train_cmd->add_option("--eps", tr.pipeline.train.converge_eps, "Convergence threshold on validation loss")
      ->capture_default_str();
  train_cmd->add_option("--margin", tr.pipeline.train.margin, "Contrastive margin")->capture_default_str();
  train_cmd->add_option("--l2", tr.pipeline.train.l2, "Weight decay")->capture_default_str();
  train_cmd->add_option("--val-fraction", tr.pipeline.train.val_fraction, "Validation share of pairs")
      ->capture_default_str();
  train_cmd->add_option("--patience", tr.pipeline.train.patience, "Epochs without improvement")
      ->capture_default_str();
  train_cmd->add_option("--m", tr.pipeline.model.m, "Dense depth")->capture_default_str();
  train_cmd->add_option("--n-m", tr.pipeline.model.n_m, "Dense width")->capture_default_str();
  train_cmd->add_option("--n-l", tr.pipeline.model.n_l, "LSTM width")->capture_default_str();
  train_cmd->add_option("--n", tr.pipeline.model.n, "Embedding width")->capture_default_str();
  train_cmd->add_option("--activation", tr.activation, "tanh | relu")
      ->check(CLI::IsMember({"tanh", "relu"}))
      ->capture_default_str();
  train_cmd->add_option("--branch-mode", tr.branch_mode, "both | attributes_only | sequence_only")
      ->check(CLI::IsMember({"both", "attributes_only", "sequence_only", "attributes-only", "sequence-only"}))
      ->capture_default_str();
  train_cmd->add_flag("--standardize", tr.standardize, "Z-score attributes per dimension");
  train_cmd->add_option("--seed", tr.pipeline.train.seed, "Random seed")->required();

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare backprop with central differences");
  gc_cmd->add_option("--trials", gc.trials, "Random small models")->check(CLI::PositiveNumber)->capture_default_str();
  gc_cmd->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
  gc_cmd->add_option("--grad-mode", gc.grad_mode, "exact | paper-literal")
      ->check(CLI::IsMember({"exact", "paper-literal"}))
      ->capture_default_str();
  gc_cmd->add_option("--step", gc.step, "Finite difference step")->check(CLI::PositiveNumber)->capture_default_str();
  gc_cmd->add_option("--tol", gc.tolerance, "Maximum relative error")->capture_default_str();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "G-way one-shot evaluation on the held-out classes");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint from train")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset JSONL")->required();
  eval_cmd->add_option("--manifest", ev.manifest, "Split manifest from train")->required();
  eval_cmd->add_option("--out", ev.out, "Report JSON path");
  eval_cmd->add_option("--csv", ev.csv, "Report CSV path");
  eval_cmd->add_option("--g", ev.G, "Classes per episode")->capture_default_str();
  eval_cmd->add_option("--queries", ev.queries, "Queries per episode")->capture_default_str();
  eval_cmd->add_option("--runs", ev.runs, "Episodes")->capture_default_str();
  eval_cmd->add_option("--distance", ev.distance, "Override the checkpoint distance")
      ->check(CLI::IsMember({"euclidean", "manhattan"}));
  eval_cmd->add_option("--sweep-triplets", ev.sweep, "Retrain at each count, e.g. 200,400,800");
  eval_cmd->add_option("--seed", ev.seed, "Random seed")->required();

  EmbedArgs em;
  auto* embed_cmd = app.add_subcommand("embed", "Write one embedding row per record");
  embed_cmd->add_option("--checkpoint", em.checkpoint, "Checkpoint from train")->required();
  embed_cmd->add_option("--data", em.data, "Dataset JSONL")->required();
  embed_cmd->add_option("--out", em.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(tr);
    if (*gc_cmd) return run_gradcheck_cmd(gc);
    if (*eval_cmd) return run_eval(ev);
    if (*embed_cmd) return run_embed(em);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const TrainingAborted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kTrainingFailed;
  } catch (const ArtifactMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMismatch;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMismatch;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMismatch;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}
