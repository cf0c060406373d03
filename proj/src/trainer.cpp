#include "attseq/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "attseq/kernels.hpp"
#include "json.hpp"

namespace attseq {
namespace {

using nlohmann::json;

json model_to_json(const ModelConfig& c) {
  return {{"m", c.m},
          {"n_m", c.n_m},
          {"n_l", c.n_l},
          {"n", c.n},
          {"activation", std::string(to_string(c.activation))},
          {"branch_mode", std::string(to_string(c.branch_mode))}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig c;
  c.m = j.at("m").get<std::size_t>();
  c.n_m = j.at("n_m").get<std::size_t>();
  c.n_l = j.at("n_l").get<std::size_t>();
  c.n = j.at("n").get<std::size_t>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.branch_mode = parse_branch_mode(j.at("branch_mode").get<std::string>());
  c.validate();
  return c;
}

json train_to_json(const TrainConfig& t) {
  return {{"lr", t.lr},
          {"max_epochs", t.max_epochs},
          {"converge_eps", t.converge_eps},
          {"margin", t.margin},
          {"l2", t.l2},
          {"val_fraction", t.val_fraction},
          {"patience", t.patience},
          {"distance", std::string(to_string(t.distance))},
          {"grad_mode", std::string(to_string(t.grad_mode))},
          {"seed", t.seed}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.lr = j.at("lr").get<double>();
  t.max_epochs = j.at("max_epochs").get<std::size_t>();
  t.converge_eps = j.at("converge_eps").get<double>();
  t.margin = j.at("margin").get<double>();
  t.l2 = j.at("l2").get<double>();
  t.val_fraction = j.at("val_fraction").get<double>();
  t.patience = j.at("patience").get<std::size_t>();
  t.distance = parse_distance(j.at("distance").get<std::string>());
  t.grad_mode = parse_grad_mode(j.at("grad_mode").get<std::string>());
  t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

}  // namespace

TrainingAborted::TrainingAborted(std::size_t epoch, std::size_t triplet_index,
                                 const std::string& detail)
    : std::runtime_error("training aborted at epoch " + std::to_string(epoch) + ", triplet " +
                         std::to_string(triplet_index) + ": " + detail),
      epoch_(epoch),
      triplet_index_(triplet_index) {}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be finite and >= 0");
  if (!(margin > 0.0)) throw std::invalid_argument("margin must be positive");
  if (!(l2 >= 0.0)) throw std::invalid_argument("l2 must be >= 0");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("val_fraction must lie in (0, 1)");
  }
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (!(converge_eps >= 0.0)) throw std::invalid_argument("converge_eps must be >= 0");
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::Converged: return "converged";
    case StopReason::Patience: return "patience";
    case StopReason::MaxEpochs: return "max_epochs";
  }
  return "max_epochs";
}

std::pair<std::vector<Triplet>, std::vector<Triplet>> holdout_split(
    const std::vector<Triplet>& triplets, double val_fraction, Rng& rng) {
  if (triplets.empty()) throw std::invalid_argument("no triplets to train on");
  if (triplets.size() == 1) return {triplets, triplets};
  std::vector<std::size_t> order(triplets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  auto n_val = static_cast<std::size_t>(
      std::llround(val_fraction * static_cast<double>(triplets.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, triplets.size() - 1);

  std::vector<Triplet> train_part;
  std::vector<Triplet> val_part;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_val ? val_part : train_part).push_back(triplets[order[k]]);
  }
  return {std::move(train_part), std::move(val_part)};
}

void sgd_step(ModelParams& params, const Gradients& grads, double lr, double l2) {
  auto p = tensors(params);
  const auto g = tensors(grads);
  for (std::size_t t = 0; t < p.size(); ++t) {
    const double decay = p[t].is_bias ? 0.0 : l2;
    auto& theta = p[t].data;
    const auto& grad = g[t].data;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] -= lr * (grad[i] + decay * theta[i]);
    }
  }
}

TrainResult train(ModelParams params, const ModelConfig& cfg,
                  const std::vector<EncodedInstance>& instances,
                  const std::vector<Triplet>& triplets, const TrainConfig& train_cfg) {
  train_cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const Rng root(train_cfg.seed);
  Rng holdout_rng = root.child("holdout");
  auto [train_set, val_set] = holdout_split(triplets, train_cfg.val_fraction, holdout_rng);

  auto validation_loss = [&](const ModelParams& p) {
    return ordered_mean(parallel::pair_losses(p, cfg, instances, val_set, train_cfg.margin,
                                              train_cfg.distance));
  };

  auto params_finite = [](const ModelParams& p) {
    for (const auto& t : tensors(p)) {
      if (!all_finite(t.data)) return false;
    }
    return true;
  };

  TrainResult result;
  TrainReport& report = result.report;
  report.n_train = train_set.size();
  report.n_val = val_set.size();
  if (!params_finite(params)) throw TrainingAborted(0, 0, "non-finite initial parameters");
  report.initial_val_loss = validation_loss(params);
  if (!std::isfinite(report.initial_val_loss)) {
    throw TrainingAborted(0, 0, "non-finite initial validation loss");
  }

  ModelParams best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_improvement = 0;

  for (std::size_t epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    Rng shuffle_rng = root.child("epoch", epoch);
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const Triplet& t = train_set[idx];
      const ForwardTrace ti = omega_forward(params, cfg, instances.at(t.a));
      const ForwardTrace tj = omega_forward(params, cfg, instances.at(t.b));
      if (!all_finite(ti.embedding) || !all_finite(tj.embedding)) {
        throw TrainingAborted(epoch, idx, "non-finite embedding");
      }
      PairGradient pg = backward_pair(params, cfg, ti, tj, t.ell, train_cfg.margin,
                                      train_cfg.distance, train_cfg.grad_mode);
      if (!std::isfinite(pg.loss)) {
        throw TrainingAborted(epoch, idx, "non-finite loss " + std::to_string(pg.loss));
      }
      if (pg.degenerate) ++report.degenerate_pairs;
      loss_sum += pg.loss;
      sgd_step(params, pg.grads, train_cfg.lr, train_cfg.l2);
    }
    report.train_loss.push_back(loss_sum / static_cast<double>(train_set.size()));
    if (!params_finite(params)) throw TrainingAborted(epoch, 0, "non-finite parameters");

    const double val = validation_loss(params);
    if (!std::isfinite(val)) throw TrainingAborted(epoch, 0, "non-finite validation loss");
    report.val_loss.push_back(val);

    if (val < best_val) {
      best_val = val;
      best_params = params;
      report.best_epoch = epoch;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }

    if (epoch > 1 && std::abs(val - report.val_loss[epoch - 2]) < train_cfg.converge_eps) {
      report.stop_reason = StopReason::Converged;
      break;
    }
    if (since_improvement >= train_cfg.patience) {
      report.stop_reason = StopReason::Patience;
      break;
    }
    report.stop_reason = StopReason::MaxEpochs;
  }

  result.params = std::move(best_params);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_loss,val_loss\n";
  char buf[128];
  for (std::size_t e = 0; e < report.val_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e + 1, report.train_loss[e],
                  report.val_loss[e]);
    out << buf;
  }
  if (!out) throw IoError("write error on " + path.string());
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  check_params(ckpt.params, ckpt.model, ckpt.meta.u, ckpt.meta.r);
  json j;
  j["format"] = "attseq-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config"] = {{"model", model_to_json(ckpt.model)},
                 {"train", train_to_json(ckpt.train)},
                 {"standardize", ckpt.standardize}};
  j["meta"] = {{"u", ckpt.meta.u},
               {"r", ckpt.meta.r},
               {"t_max", ckpt.meta.t_max},
               {"class_ids", ckpt.meta.class_ids}};
  json tensors_json = json::object();
  for (const auto& t : tensors(ckpt.params)) {
    tensors_json[t.name] = {{"shape", {t.rows, t.cols}},
                            {"data", std::vector<double>(t.data.begin(), t.data.end())}};
  }
  j["tensors"] = std::move(tensors_json);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("write error on " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();

  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  }

  Checkpoint ckpt;
  try {
    if (j.at("format").get<std::string>() != "attseq-checkpoint") {
      throw CheckpointError("not an attseq checkpoint: " + path.string());
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint version " + std::to_string(version) +
                            " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    const json& config = j.at("config");
    ckpt.model = model_from_json(config.at("model"));
    ckpt.train = train_from_json(config.at("train"));
    ckpt.standardize = config.at("standardize").get<bool>();
    const json& meta = j.at("meta");
    ckpt.meta.u = meta.at("u").get<std::size_t>();
    ckpt.meta.r = meta.at("r").get<std::size_t>();
    ckpt.meta.t_max = meta.at("t_max").get<std::size_t>();
    ckpt.meta.class_ids = meta.at("class_ids").get<std::vector<ClassId>>();

    ckpt.params = zero_params(ckpt.model, ckpt.meta.u, ckpt.meta.r);
    const json& stored = j.at("tensors");
    auto views = tensors(ckpt.params);
    if (stored.size() != views.size()) {
      throw CheckpointError("corrupt checkpoint: expected " + std::to_string(views.size()) +
                            " tensors, found " + std::to_string(stored.size()));
    }
    for (auto& view : views) {
      const json& t = stored.at(view.name);
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      const auto data = t.at("data").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] != view.rows || shape[1] != view.cols ||
          data.size() != view.data.size()) {
        throw CheckpointError("corrupt checkpoint: tensor " + view.name + " has wrong shape");
      }
      std::copy(data.begin(), data.end(), view.data.begin());
    }
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
  return ckpt;
}

}  // namespace attseq
