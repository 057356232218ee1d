#pragma once

// Cartesian grid search. A search space names a Table-1 preset, explicit
// axes, or both (explicit axes replace preset axes of the same name). Axes
// are model fields plus "epochs"; cells enumerate with the first axis in
// key order varying slowest.

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <thread>

#include "roixai/harness/train.hpp"

namespace roixai {

struct SearchSpace {
  std::map<std::string, std::vector<Json>> axes;  // sorted by name
  std::optional<Architecture> architecture;       // fixed by a preset
  std::optional<std::size_t> budget;              // maximum number of runs
};

/// Table 1 rows. The dropout range 0.5-0.75 is sampled at three points.
inline SearchSpace table1_preset(Architecture a) {
  SearchSpace s;
  s.architecture = a;
  switch (a) {
    case Architecture::resnet_tiny:
      s.axes["learning_rate"] = {1e-2, 1e-4, 1e-5};
      s.axes["dropout_ratio"] = {0.5, 0.625, 0.75};
      s.axes["epochs"] = {10};
      break;
    case Architecture::inception_tiny:
      s.axes["learning_rate"] = {1e-1, 1e-3, 1e-4};
      s.axes["reg_coeff"] = {1e-1, 1e-3, 5e-4};
      s.axes["epochs"] = {20, 50};
      break;
    case Architecture::vit_two_stage:
      s.axes["learning_rate"] = {1e-5, 1e-6};
      s.axes["transformer_depth"] = {4, 8};
      s.axes["transformer_heads"] = {8, 12};
      break;
    case Architecture::unet:
      s.axes["upsampling"] = {"bilinear", "transposed_conv"};
      s.axes["activation"] = {"relu", "leaky_relu"};
      s.axes["base_channels"] = {Json::array({32, 64, 128}), Json::array({64, 128, 256})};
      break;
    case Architecture::unet_mlp:
      throw ConfigError("search space: Table 1 has no row for unet_mlp");
  }
  return s;
}

inline SearchSpace search_space_from_json(const Json& j) {
  detail::ObjectReader r(j, "space");
  int version = 0;
  r.require("schema_version", version);
  if (version != kConfigSchemaVersion) throw ConfigError("space: unsupported schema_version " + std::to_string(version));
  SearchSpace s;
  std::string preset;
  r.get("preset", preset);
  if (!preset.empty()) {
    try {
      s = table1_preset(parse_architecture(preset));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("space.preset: ") + e.what());
    }
  }
  if (const auto* axes = r.child("axes")) {
    if (!axes->is_object()) throw ConfigError("space.axes: expected an object of arrays");
    for (const auto& [k, v] : axes->items()) {
      if (!v.is_array() || v.empty()) throw ConfigError("space.axes." + k + ": expected a nonempty array");
      s.axes[k] = std::vector<Json>(v.begin(), v.end());
    }
  }
  std::size_t budget = 0;
  r.get("budget", budget);
  if (r.has("budget")) {
    if (budget < 1) throw ConfigError("space.budget: must be >= 1");
    s.budget = budget;
  }
  r.finish();
  if (s.axes.empty()) throw ConfigError("space: no axes (give a preset or axes)");
  return s;
}

struct GridCell {
  std::size_t index = 0;
  ExperimentConfig config;
  std::string description;  // "axis=value ..." in axis order
};

/// Every cell of `space` applied to `base`, in enumeration order. Each cell
/// trains under derive_seed(base.seed, index) and writes to its own directory.
inline std::vector<GridCell> enumerate_grid(const ExperimentConfig& base, const SearchSpace& space) {
  std::vector<std::string> names;
  std::vector<std::size_t> sizes;
  std::size_t total = 1;
  for (const auto& [k, v] : space.axes) {
    names.push_back(k);
    sizes.push_back(v.size());
    total *= v.size();
  }
  if (space.budget) total = std::min(total, *space.budget);
  const auto base_dir = resolve_output_dir(base);
  std::vector<GridCell> cells;
  std::vector<std::size_t> pick(names.size(), 0);
  for (std::size_t index = 0; index < total; ++index) {
    // Mixed-radix digits of the index, last axis fastest.
    std::size_t rest = index;
    for (std::size_t a = names.size(); a-- > 0;) {
      pick[a] = rest % sizes[a];
      rest /= sizes[a];
    }
    Json model = to_json(base.model);
    if (space.architecture) model["architecture"] = to_string(*space.architecture);
    GridCell cell;
    cell.index = index;
    cell.config = base;
    for (std::size_t a = 0; a < names.size(); ++a) {
      const auto& value = space.axes.at(names[a])[pick[a]];
      if (names[a] == "epochs") {
        cell.config.epochs = value.get<std::size_t>();
      } else {
        if (!model.contains(names[a])) throw ConfigError("space.axes: unknown axis '" + names[a] + "'");
        model[names[a]] = value;
      }
      cell.description += (a ? " " : "") + names[a] + "=" + value.dump();
    }
    cell.config.model = model_spec_from_json(model, "grid cell " + std::to_string(index));
    cell.config.seed = derive_seed(base.seed, index);
    cell.config.name = base.label() + " [" + cell.description + "]";
    char dir[32];
    std::snprintf(dir, sizeof dir, "cell_%03zu", index);
    cell.config.output_dir = base_dir / dir;
    cell.config.validate(false);
    cells.push_back(std::move(cell));
  }
  return cells;
}

/// Ranked by final validation AUC (PSNR for the pure autoencoder), best
/// first; failed runs and runs without a score last; ties by lower digest.
inline std::vector<RunRecord> rank_runs(std::vector<RunRecord> runs) {
  const auto score = [](const RunRecord& r) -> std::optional<double> {
    if (r.status != "ok" || !r.final_metrics()) return std::nullopt;
    return selection_metric(*r.final_metrics(), r.config.model.architecture);
  };
  std::stable_sort(runs.begin(), runs.end(), [&](const RunRecord& a, const RunRecord& b) {
    const auto sa = score(a), sb = score(b);
    if (sa.has_value() != sb.has_value()) return sa.has_value();
    if (sa && *sa != *sb) return *sa > *sb;
    return a.digest < b.digest;
  });
  return runs;
}

struct GridOptions {
  std::size_t jobs = 0;  // 0: hardware concurrency
  std::ostream* log = nullptr;
  bool write_outputs = true;
};

/// Runs every cell on a shared dataset; a failing cell is recorded and the
/// search continues. Returns the leaderboard.
inline std::vector<RunRecord> grid_search(const ExperimentConfig& base, const SearchSpace& space, const GridOptions& opt = {}) {
  const auto cells = enumerate_grid(base, space);
  const Dataset data = load_dataset(base);
  std::vector<RunRecord> records(cells.size());
  std::size_t jobs = opt.jobs ? opt.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      const auto& cell = cells[i];
      try {
        records[i] = train(cell.config, data, {std::nullopt, nullptr, opt.write_outputs}).record;
      } catch (const std::exception& e) {
        RunRecord failed;
        failed.config = cell.config;
        failed.digest = config_digest(cell.config);
        failed.status = "failed";
        failed.error = e.what();
        records[i] = std::move(failed);
        if (opt.write_outputs) {
          try {
            std::filesystem::create_directories(cell.config.output_dir);
            write_text_file(cell.config.output_dir / kRunRecordFile, to_json(records[i]).dump(2) + "\n");
          } catch (const std::exception& w) {
            records[i].error += std::string("; run record not written: ") + w.what();
          }
        }
      }
      if (opt.log) {
        std::lock_guard lock(log_mutex);
        *opt.log << "cell " << i << " " << records[i].status << " " << cell.description;
        if (const auto* m = records[i].final_metrics()) {
          if (m->auc) *opt.log << " auc " << format_metric(*m->auc);
          if (m->psnr_db) *opt.log << " psnr " << format_metric(*m->psnr_db, 2);
        }
        if (!records[i].error.empty()) *opt.log << " error: " << records[i].error;
        *opt.log << '\n';
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rank_runs(std::move(records));
}

}  // namespace roixai
