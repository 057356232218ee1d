#pragma once

#include <chrono>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "roixai/attribution/attribution.hpp"
#include "roixai/attribution/localization.hpp"
#include "roixai/data/split.hpp"
#include "roixai/harness/checkpoint.hpp"

namespace roixai {

struct Dataset {
  std::vector<Volume> train;
  std::vector<Volume> validation;
};

/// Volumes with the model's input extent.
inline std::vector<Volume> fit_to_model(std::vector<Volume> volumes, std::size_t edge) {
  for (auto& v : volumes)
    if (v.height != edge || v.width != edge) v = resize_volume(v, edge);
  return volumes;
}

inline std::vector<Volume> load_manifest_volumes(const std::filesystem::path& manifest, IntensityScaling scaling) {
  std::vector<Volume> out;
  for (const auto& e : read_manifest(manifest)) out.push_back(load_entry(e, scaling));
  return out;
}

inline std::vector<Volume> generate_phantoms(const PhantomParams& p, std::size_t first, std::size_t count) {
  std::vector<Volume> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_phantom(p, first + i));
  return out;
}

/// Patient-level split of the configured data, with positives on both sides.
inline Dataset load_dataset(const ExperimentConfig& c) {
  std::vector<Volume> all;
  double fraction = c.data.train_fraction;
  if (c.data.source == DataConfig::Source::phantoms) {
    all = generate_phantoms(c.data.phantoms, 0, c.data.train_count + c.data.validation_count);
    fraction = static_cast<double>(c.data.train_count) / static_cast<double>(all.size());
  } else {
    all = load_manifest_volumes(c.data.manifest, c.data.scaling);
  }
  std::vector<int> labels;
  const bool labelled = std::all_of(all.begin(), all.end(), [](const Volume& v) { return v.label.has_value(); });
  if (is_classifier(c.model.architecture)) {
    if (!labelled) throw std::runtime_error("dataset: classifier training needs a label on every volume");
    for (const auto& v : all) labels.push_back(*v.label);
  }
  const auto split = make_split(all.size(), fraction, c.data.split_seed, labels);
  Dataset d;
  for (auto i : split.train) d.train.push_back(all[i]);
  for (auto i : split.validation) d.validation.push_back(all[i]);
  d.train = fit_to_model(std::move(d.train), c.model.input_edge);
  d.validation = fit_to_model(std::move(d.validation), c.model.input_edge);
  return d;
}

struct EvalOptions {
  bool localization = false;  // Grad-CAM energy on positive volumes that carry masks
  std::ostream* log = nullptr;
};

/// Classification: AUC and accuracy over volume probabilities (AUC omitted
/// for a single-class set). Reconstruction: PSNR and SSIM averaged over slices.
template <class T>
MetricsReport evaluate_model(Model<T>& model, const std::vector<Volume>& volumes, const EvalOptions& opt = {}) {
  if (volumes.empty()) throw std::invalid_argument("evaluate: no volumes");
  MetricsReport r;
  r.n_samples = volumes.size();
  if (model.is_classifier()) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& v : volumes) {
      if (!v.label) continue;
      scores.push_back(classify_volume(model, v));
      labels.push_back(*v.label);
    }
    if (labels.empty()) throw std::invalid_argument("evaluate: classification needs labelled volumes");
    r.accuracy = accuracy(scores, labels);
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos > 0 && pos < static_cast<std::ptrdiff_t>(labels.size())) {
      r.auc = roc_auc(scores, labels);
    } else if (opt.log) {
      *opt.log << "warning: evaluation set has a single class; AUC omitted\n";
    }
  }
  if (model.is_reconstructor()) {
    double psnr_sum = 0.0, ssim_sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : volumes) {
      const auto recon = reconstruct(model, v.batch<T>());
      const auto rv = recon.values();
      for (std::size_t s = 0; s < v.slices; ++s) {
        std::vector<double> ref(v.data.begin() + static_cast<std::ptrdiff_t>(s * v.slice_size()),
                                v.data.begin() + static_cast<std::ptrdiff_t>((s + 1) * v.slice_size()));
        std::vector<double> out(rv.begin() + static_cast<std::ptrdiff_t>(s * v.slice_size()),
                                rv.begin() + static_cast<std::ptrdiff_t>((s + 1) * v.slice_size()));
        psnr_sum += psnr(ref, out);
        ssim_sum += ssim(ref, out, v.height, v.width);
        ++n;
      }
    }
    r.psnr_db = psnr_sum / static_cast<double>(n);
    r.ssim = ssim_sum / static_cast<double>(n);
  }
  if (opt.localization && model.is_classifier()) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : volumes) {
      if (v.label != 1 || !v.has_mask()) continue;
      const auto map = gradcam(model, v.batch<T>(), Target::class_logit);
      sum += localization_energy(map.values, v.roi_mask);
      ++n;
    }
    if (n) r.localization_energy = sum / static_cast<double>(n);
  }
  r.validate();
  return r;
}

struct TrainOptions {
  std::optional<std::filesystem::path> resume;  // checkpoint to continue from
  std::ostream* log = nullptr;
  bool write_outputs = true;
};

struct TrainResult {
  RunRecord record;
  std::filesystem::path output_dir;
  TrainingState state;
};

inline constexpr const char* kFinalCheckpoint = "final.ckpt";
inline constexpr const char* kBestCheckpoint = "best.ckpt";
inline constexpr const char* kRunRecordFile = "run.json";

/// One epoch of train_step over the shuffled training split, each volume
/// under its own augmentation draw. Returns the mean loss.
inline double train_epoch(TrainingState& s, const std::vector<Volume>& train) {
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  s.rng.shuffle(order.begin(), order.end());
  double total = 0.0;
  for (auto i : order) {
    const Volume vol = s.config.augment_enabled ? augment(train[i], s.config.augment, s.rng.next_u64()) : train[i];
    total += train_step(*s.model, vol.batch<float>(), vol.label, s.optimizer, s.config.loss, s.rng);
  }
  return total / static_cast<double>(train.size());
}

/// Trains `config` from scratch or from `opt.resume`, evaluating every
/// eval_every epochs and at the last epoch. Writes final.ckpt, best.ckpt
/// (highest validation AUC, or PSNR for the pure autoencoder) and run.json.
inline TrainResult train(const ExperimentConfig& config, const Dataset& data, const TrainOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  config.validate(false);
  if (data.train.empty() || data.validation.empty()) throw std::invalid_argument("train: empty split");
  TrainingState s = opt.resume ? resume_state(read_checkpoint(*opt.resume), config) : initial_state(config);
  s.config = config;
  s.record.config = config;
  const auto out_dir = resolve_output_dir(config);
  if (opt.write_outputs) std::filesystem::create_directories(out_dir);
  const auto arch = config.model.architecture;

  while (s.epoch < config.epochs) {
    const double loss = train_epoch(s, data.train);
    s.record.train_loss.push_back(loss);
    ++s.epoch;
    if (opt.log) *opt.log << config.label() << " epoch " << s.epoch << "/" << config.epochs << " loss " << format_metric(loss, 6);
    if (s.epoch % config.eval_every == 0 || s.epoch == config.epochs) {
      std::ostringstream warnings;
      const auto m = evaluate_model(*s.model, data.validation, {false, &warnings});
      s.record.evals.push_back({s.epoch, m});
      const auto score = selection_metric(m, arch);
      if (opt.log) {
        if (m.auc) *opt.log << " val_auc " << format_metric(*m.auc);
        if (m.psnr_db) *opt.log << " val_psnr " << format_metric(*m.psnr_db, 2);
        if (m.ssim) *opt.log << " val_ssim " << format_metric(*m.ssim, 4);
      }
      if (score && (!s.record.best_value || *score > *s.record.best_value)) {
        s.record.best_value = score;
        s.record.best_epoch = s.epoch;
        if (opt.write_outputs) save_checkpoint(out_dir / kBestCheckpoint, s);
      }
      if (opt.log) *opt.log << '\n' << warnings.str();
    } else if (opt.log) {
      *opt.log << '\n';
    }
  }
  s.record.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (opt.write_outputs) {
    save_checkpoint(out_dir / kFinalCheckpoint, s);
    write_text_file(out_dir / kRunRecordFile, to_json(s.record).dump(2) + "\n");
  }
  RunRecord record = s.record;
  return {std::move(record), out_dir, std::move(s)};
}

inline TrainResult train(const ExperimentConfig& config, const TrainOptions& opt = {}) {
  return train(config, load_dataset(config), opt);
}

}  // namespace roixai
