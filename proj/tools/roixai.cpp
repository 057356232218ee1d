// roixai command line. Exit status: 0 success, 1 usage or config error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "roixai/harness/attribute_cmd.hpp"
#include "roixai/harness/grid.hpp"
#include "roixai/harness/report.hpp"

namespace fs = std::filesystem;
using namespace roixai;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

IntensityScaling parse_scaling(const std::string& s) {
  for (const auto& [e, name] : detail::kScalingNames)
    if (name == s) return e;
  throw UsageError("unknown --scaling '" + s + "' (min_max, none)");
}

// A manifest file, a directory holding manifest.csv, or one .npy volume.
std::vector<Volume> load_data(const fs::path& p, IntensityScaling scaling) {
  if (fs::is_directory(p)) return load_manifest_volumes(p / "manifest.csv", scaling);
  if (p.extension() == ".npy") return {load_volume_file(p, scaling)};
  return load_manifest_volumes(p, scaling);
}

int cmd_train(const fs::path& config, const std::optional<fs::path>& resume, bool quiet) {
  const auto c = load_config(config);
  const auto r = train(c, {resume, quiet ? nullptr : &std::cerr, true});
  std::cout << r.output_dir.string() << "\n";
  return 0;
}

int cmd_evaluate(const fs::path& checkpoint, const fs::path& data, const std::string& scaling, bool localization) {
  auto model = load_model(checkpoint);
  const auto volumes = fit_to_model(load_data(data, parse_scaling(scaling)), model->spec().input_edge);
  const auto m = evaluate_model(*model, volumes, {localization, &std::cerr});
  std::cout << to_json(m).dump(2) << "\n";
  return 0;
}

int cmd_gridsearch(const fs::path& config, const fs::path& space_path, std::size_t jobs, bool quiet) {
  const auto base = load_config(config);
  const auto space = search_space_from_json(read_json_file(space_path));
  const auto board = grid_search(base, space, {jobs, quiet ? nullptr : &std::cerr, true});
  const auto dir = resolve_output_dir(base);
  Json j = Json::array();
  for (const auto& r : board) {
    const auto* m = r.final_metrics();
    j.push_back({{"name", r.config.name},
                 {"digest", r.digest},
                 {"status", r.status},
                 {"output_dir", r.config.output_dir.generic_string()},
                 {"metrics", m ? to_json(*m) : Json(nullptr)}});
  }
  write_text_file(dir / "leaderboard.json", j.dump(2) + "\n");
  write_text_file(dir / "table.md", render_table(board));
  std::cout << render_table(board);
  const bool any_failed = std::any_of(board.begin(), board.end(), [](const RunRecord& r) { return r.status != "ok"; });
  return any_failed ? 2 : 0;
}

int cmd_attribute(const fs::path& checkpoint, const fs::path& volume, const std::string& method, const fs::path& out,
                  const std::string& target, const std::string& layer, std::uint64_t seed, std::size_t samples,
                  double sigma, const std::string& scaling, const std::string& normalization) {
  AttributeOptions opt;
  try {
    opt.method = parse_method(method);
    if (!target.empty()) opt.target = parse_target(target);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (normalization == "per_volume") {
    opt.normalization = Normalization::per_volume;
  } else if (normalization != "per_slice") {
    throw UsageError("unknown --normalization '" + normalization + "' (per_slice, per_volume)");
  }
  opt.layer = layer;
  opt.seed = seed;
  opt.smoothgrad.n = samples;
  opt.smoothgrad.sigma = sigma;
  auto model = load_model(checkpoint);
  const auto v = load_volume_file(volume, parse_scaling(scaling));
  const auto res = attribute_volume(*model, v, opt, out);
  std::cout << res.index.string() << "\n";
  return 0;
}

int cmd_report(const fs::path& runs_dir, const fs::path& out, const std::optional<fs::path>& volume,
               const std::string& method, std::optional<std::size_t> slice, const std::string& scaling) {
  const auto runs = collect_runs(runs_dir);
  if (runs.empty()) throw std::runtime_error("no run.json found below '" + runs_dir.string() + "'");
  fs::create_directories(out);
  const auto table = render_table(runs);
  write_text_file(out / "table.md", table);
  std::cout << table;
  if (volume) {
    Method m;
    try {
      m = parse_method(method);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const auto labels = render_comparison(runs, load_volume_file(*volume, parse_scaling(scaling)), m, slice, out / "figure.png");
    if (labels.empty()) {
      std::cerr << "warning: no run supports " << method << "; figure.png not written\n";
    } else {
      Json j = labels;
      write_text_file(out / "figure.json", Json{{"method", method}, {"tiles", j}}.dump(2) + "\n");
    }
  }
  return 0;
}

int cmd_phantoms(const fs::path& params_path, std::size_t count, const fs::path& out, std::size_t first) {
  const Json j = read_json_file(params_path);
  Json fields = j;
  if (fields.is_object() && fields.contains("schema_version")) {
    if (fields["schema_version"] != kConfigSchemaVersion) throw ConfigError("phantoms: unsupported schema_version");
    fields.erase("schema_version");
  }
  const auto p = phantom_params_from_json(fields);
  fs::create_directories(out);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = first; i < first + count; ++i) {
    const auto v = generate_phantom(p, i);
    char stem[32];
    std::snprintf(stem, sizeof stem, "phantom_%05zu", i);
    write_npy((out / (std::string(stem) + ".npy")).string(), volume_array(v));
    fs::path mask;
    if (v.has_mask()) {
      mask = std::string(stem) + "_mask.npy";
      write_npy((out / mask).string(), mask_array(v));
    }
    entries.push_back({v.patient_id, std::string(stem) + ".npy", v.label, mask});
  }
  write_manifest(out / "manifest.csv", entries);
  std::cout << (out / "manifest.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volume classifiers, reconstruction and attribution maps on knee MRI"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "No progress output");

  fs::path config, checkpoint, data, space, volume, out, params, runs;
  std::optional<fs::path> resume, figure_volume;
  std::size_t jobs = 0, count = 0, first = 0, samples = 25;
  std::optional<std::size_t> slice;
  std::string method = "gradcam", target, layer, scaling = "min_max", normalization = "per_slice";
  std::uint64_t seed = 0;
  double sigma = 0.15;
  bool localization = false;

  auto* train_cmd = app.add_subcommand("train", "Train one configuration");
  train_cmd->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from")->check(CLI::ExistingFile);

  auto* eval_cmd = app.add_subcommand("evaluate", "Metrics of a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data, "Manifest CSV, directory with manifest.csv, or one .npy volume")
      ->required()
      ->check(CLI::ExistingPath);
  eval_cmd->add_option("--scaling", scaling, "Intensity scaling: min_max or none");
  eval_cmd->add_flag("--localization", localization, "Grad-CAM energy inside lesion masks");

  auto* grid_cmd = app.add_subcommand("gridsearch", "Train every cell of a search space");
  grid_cmd->add_option("--config", config, "Base experiment config")->required()->check(CLI::ExistingFile);
  grid_cmd->add_option("--space", space, "Search space (JSON)")->required()->check(CLI::ExistingFile);
  grid_cmd->add_option("--jobs", jobs, "Parallel cells (default: number of cores)");

  auto* attr_cmd = app.add_subcommand("attribute", "Attribution maps and overlays for one volume");
  attr_cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  attr_cmd->add_option("--volume", volume, ".npy volume (s, H, W)")->required()->check(CLI::ExistingFile);
  attr_cmd->add_option("--method", method, "saliency, smoothgrad, guided_backprop, gradcam, guided_gradcam")->required();
  attr_cmd->add_option("--out", out)->required();
  attr_cmd->add_option("--target", target, "class_logit, recon_loss or latent_energy");
  attr_cmd->add_option("--layer", layer, "Grad-CAM layer");
  attr_cmd->add_option("--seed", seed, "SmoothGrad noise seed");
  attr_cmd->add_option("--samples", samples, "SmoothGrad samples");
  attr_cmd->add_option("--sigma", sigma, "SmoothGrad noise level");
  attr_cmd->add_option("--scaling", scaling);
  attr_cmd->add_option("--normalization", normalization, "Overlay scaling: per_slice or per_volume");

  auto* report_cmd = app.add_subcommand("report", "Results table, optionally a comparison figure");
  report_cmd->add_option("--runs", runs, "Directory searched for run.json")->required()->check(CLI::ExistingDirectory);
  report_cmd->add_option("--out", out)->required();
  report_cmd->add_option("--volume", figure_volume, "Volume for the comparison figure")->check(CLI::ExistingFile);
  report_cmd->add_option("--method", method, "Attribution method for the figure");
  report_cmd->add_option("--slice", slice, "Figure slice (default: middle)");
  report_cmd->add_option("--scaling", scaling);

  auto* ph_cmd = app.add_subcommand("phantoms", "Write synthetic volumes, masks and a manifest");
  ph_cmd->add_option("--params", params, "Phantom parameters (JSON)")->required()->check(CLI::ExistingFile);
  ph_cmd->add_option("--count", count)->required()->check(CLI::PositiveNumber);
  ph_cmd->add_option("--out", out)->required();
  ph_cmd->add_option("--first", first, "Index of the first phantom");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) return cmd_train(config, resume, quiet);
    if (*eval_cmd) return cmd_evaluate(checkpoint, data, scaling, localization);
    if (*grid_cmd) return cmd_gridsearch(config, space, jobs, quiet);
    if (*attr_cmd)
      return cmd_attribute(checkpoint, volume, method, out, target, layer, seed, samples, sigma, scaling, normalization);
    if (*report_cmd) return cmd_report(runs, out, figure_volume, method, slice, scaling);
    if (*ph_cmd) return cmd_phantoms(params, count, out, first);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
