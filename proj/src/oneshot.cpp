#include "attseq/oneshot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "attseq/kernels.hpp"
#include "json.hpp"

namespace attseq {

Episode build_episode(const std::vector<ClassId>& pool_labels, std::size_t G,
                      std::size_t n_queries, Rng& rng) {
  if (G < 1) throw std::invalid_argument("episode needs G >= 1");
  if (n_queries < 1) throw std::invalid_argument("episode needs at least one query");
  std::map<ClassId, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < pool_labels.size(); ++i) by_class[pool_labels[i]].push_back(i);
  if (by_class.size() < G) {
    throw DataError("episode needs " + std::to_string(G) + " classes, pool has " +
                    std::to_string(by_class.size()));
  }

  std::vector<ClassId> classes;
  for (const auto& [cls, members] : by_class) classes.push_back(cls);
  rng.shuffle(classes);
  classes.resize(G);
  std::sort(classes.begin(), classes.end());

  Episode ep;
  std::vector<std::size_t> remaining;
  for (ClassId cls : classes) {
    const auto& members = by_class[cls];
    const std::size_t pick = rng.below(members.size());
    ep.support.push_back(members[pick]);
    ep.support_labels.push_back(cls);
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (k != pick) remaining.push_back(members[k]);
    }
  }
  if (remaining.size() < n_queries) {
    throw DataError("episode needs " + std::to_string(n_queries) + " queries, only " +
                    std::to_string(remaining.size()) + " non-support instances in " +
                    std::to_string(G) + " classes");
  }
  // Partial Fisher-Yates: the first n_queries slots become the sample.
  for (std::size_t k = 0; k < n_queries; ++k) {
    std::swap(remaining[k], remaining[k + rng.below(remaining.size() - k)]);
  }
  ep.queries.assign(remaining.begin(), remaining.begin() + static_cast<std::ptrdiff_t>(n_queries));
  for (std::size_t q : ep.queries) ep.query_labels.push_back(pool_labels[q]);
  return ep;
}

ClassId classify(const ModelParams& params, const ModelConfig& cfg, DistanceKind kind,
                 const std::vector<EncodedInstance>& support,
                 const std::vector<ClassId>& support_labels, const EncodedInstance& query) {
  const Vector q = embed(params, cfg, query);
  std::vector<Vector> s;
  s.reserve(support.size());
  for (const auto& inst : support) s.push_back(embed(params, cfg, inst));
  return support_labels[nearest_support(q, s, support_labels, kind)];
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double episode_accuracy(const std::vector<Vector>& pool_embeddings, const Episode& episode,
                        DistanceKind kind) {
  std::vector<Vector> support;
  for (std::size_t s : episode.support) support.push_back(pool_embeddings.at(s));
  std::vector<Vector> queries;
  for (std::size_t q : episode.queries) queries.push_back(pool_embeddings.at(q));
  const auto predicted = parallel::classify_all(queries, support, episode.support_labels, kind);
  std::size_t correct = 0;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    if (predicted[k] == episode.query_labels[k]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

EvalReport evaluate(const ModelParams& params, const ModelConfig& cfg, DistanceKind kind,
                    const std::vector<EncodedInstance>& pool,
                    const std::vector<ClassId>& pool_labels, std::size_t G,
                    std::size_t n_queries, std::size_t n_runs, std::uint64_t seed) {
  if (n_runs < 1) throw std::invalid_argument("evaluation needs n_runs >= 1");
  if (pool.size() != pool_labels.size()) throw ShapeError("pool and labels differ in length");
  const auto embeddings = parallel::embed_all(params, cfg, pool);
  const Rng root(seed);

  EvalReport report;
  report.G = G;
  report.n_queries = n_queries;
  report.n_runs = n_runs;
  report.distance = kind;
  for (std::size_t run = 0; run < n_runs; ++run) {
    Rng rng = root.child("episode", run);
    const Episode ep = build_episode(pool_labels, G, n_queries, rng);
    report.per_run.push_back(episode_accuracy(embeddings, ep, kind));
  }
  report.median = percentile(report.per_run, 0.5);
  report.p25 = percentile(report.per_run, 0.25);
  report.p75 = percentile(report.per_run, 0.75);
  report.mean = ordered_mean(report.per_run);
  return report;
}

std::string eval_report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["G"] = r.G;
  j["n_queries"] = r.n_queries;
  j["n_runs"] = r.n_runs;
  j["distance"] = std::string(to_string(r.distance));
  j["per_run"] = r.per_run;
  j["median"] = r.median;
  j["p25"] = r.p25;
  j["p75"] = r.p75;
  j["mean"] = r.mean;
  return j.dump(2);
}

std::string eval_csv_header() { return "G,n_queries,n_runs,distance,median,p25,p75,mean"; }

std::string eval_csv_row(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%s,%.17g,%.17g,%.17g,%.17g", r.G, r.n_queries,
                r.n_runs, std::string(to_string(r.distance)).c_str(), r.median, r.p25, r.p75,
                r.mean);
  return buf;
}

}  // namespace attseq
