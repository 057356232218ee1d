#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "roixai/harness/config.hpp"
#include "roixai/metrics/metrics.hpp"

namespace roixai {

namespace detail {
// JSON has no infinity; the exact-reconstruction PSNR is stored as "inf".
inline Json metric_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  return *v;
}

inline std::optional<double> metric_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ConfigError("metric value '" + s + "' is not a number");
  }
  return j.get<double>();
}
}  // namespace detail

inline Json to_json(const MetricsReport& m) {
  return {{"auc", detail::metric_json(m.auc)},
          {"accuracy", detail::metric_json(m.accuracy)},
          {"psnr_db", detail::metric_json(m.psnr_db)},
          {"ssim", detail::metric_json(m.ssim)},
          {"localization_energy", detail::metric_json(m.localization_energy)},
          {"n_samples", m.n_samples}};
}

inline MetricsReport metrics_from_json(const Json& j) {
  MetricsReport m;
  m.auc = detail::metric_from_json(j.at("auc"));
  m.accuracy = detail::metric_from_json(j.at("accuracy"));
  m.psnr_db = detail::metric_from_json(j.at("psnr_db"));
  m.ssim = detail::metric_from_json(j.at("ssim"));
  m.localization_energy = detail::metric_from_json(j.at("localization_energy"));
  m.n_samples = j.at("n_samples").get<std::size_t>();
  return m;
}

/// Model-selection score: AUC when the model classifies, else PSNR.
inline std::optional<double> selection_metric(const MetricsReport& m, Architecture arch) {
  return is_classifier(arch) ? m.auc : m.psnr_db;
}

struct EvalEntry {
  std::size_t epoch = 0;  // epochs completed when the evaluation ran
  MetricsReport metrics;
};

/// Training history of one experiment. Everything except wall_time_s is a
/// function of the config.
struct RunRecord {
  ExperimentConfig config;
  std::string digest;
  std::vector<double> train_loss;  // index e holds the mean loss of epoch e + 1
  std::vector<EvalEntry> evals;
  std::optional<std::size_t> best_epoch;
  std::optional<double> best_value;
  std::string status = "ok";  // "ok" or "failed"
  std::string error;
  double wall_time_s = 0.0;
  std::filesystem::path location;  // directory the record was read from; not serialized

  const MetricsReport* final_metrics() const { return evals.empty() ? nullptr : &evals.back().metrics; }
};

inline Json history_json(const RunRecord& r) {
  Json evals = Json::array();
  for (const auto& e : r.evals) evals.push_back({{"epoch", e.epoch}, {"metrics", to_json(e.metrics)}});
  return {{"train_loss", r.train_loss},
          {"evals", evals},
          {"best_epoch", r.best_epoch ? Json(*r.best_epoch) : Json(nullptr)},
          {"best_value", detail::metric_json(r.best_value)}};
}

inline void read_history(const Json& j, RunRecord& r) {
  r.train_loss = j.at("train_loss").get<std::vector<double>>();
  r.evals.clear();
  for (const auto& e : j.at("evals")) r.evals.push_back({e.at("epoch").get<std::size_t>(), metrics_from_json(e.at("metrics"))});
  r.best_epoch = j.at("best_epoch").is_null() ? std::nullopt : std::optional<std::size_t>(j.at("best_epoch").get<std::size_t>());
  r.best_value = detail::metric_from_json(j.at("best_value"));
}

inline Json to_json(const RunRecord& r) {
  return {{"schema_version", kConfigSchemaVersion},
          {"label", r.config.label()},
          {"config", to_json(r.config)},
          {"digest", r.digest},
          {"history", history_json(r)},
          {"status", r.status},
          {"error", r.error},
          {"wall_time_s", r.wall_time_s}};
}

inline RunRecord run_record_from_json(const Json& j) {
  RunRecord r;
  // A record whose manifest has since moved still renders in reports.
  r.config = config_from_json(j.at("config"), {}, false);
  r.digest = j.at("digest").get<std::string>();
  read_history(j.at("history"), r);
  r.status = j.at("status").get<std::string>();
  r.error = j.at("error").get<std::string>();
  r.wall_time_s = j.at("wall_time_s").get<double>();
  return r;
}

}  // namespace roixai
