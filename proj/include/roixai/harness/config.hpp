#pragma once

// Experiment configuration as strict JSON: a fixed schema_version, and any
// key the schema does not name is an error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "roixai/data/augment.hpp"
#include "roixai/data/manifest.hpp"
#include "roixai/data/phantom.hpp"
#include "roixai/models/loss.hpp"
#include "roixai/models/model_spec.hpp"

namespace roixai {

using Json = nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kOutputRootEnv = "ROIXAI_OUTPUT_ROOT";

/// Invalid user-supplied configuration: bad JSON, unknown keys, bad values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Reads fields of one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <class V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<V>();
    } catch (const Json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  template <class V>
  void require(const char* key, V& out) {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    get(key, out);
  }

  template <class E, std::size_t N>
  void get_enum(const char* key, E& out, const std::array<std::pair<E, std::string_view>, N>& table) {
    std::string text;
    get(key, text);
    if (text.empty()) return;
    try {
      out = parse_enum(text, table, key);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where_ + ": " + e.what());
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  bool has(const char* key) const { return j_.contains(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

inline constexpr std::array<std::pair<IntensityScaling, std::string_view>, 2> kScalingNames{{
    {IntensityScaling::min_max, "min_max"},
    {IntensityScaling::none, "none"},
}};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001B3ULL;
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace detail

inline std::string_view to_string(IntensityScaling s) { return detail::enum_name(s, detail::kScalingNames); }

// ---------------------------------------------------------------- sections

inline Json to_json(const ModelSpec& m) {
  return {{"architecture", to_string(m.architecture)},
          {"learning_rate", m.learning_rate},
          {"dropout_ratio", m.dropout_ratio},
          {"reg_coeff", m.reg_coeff},
          {"transformer_depth", m.transformer_depth},
          {"transformer_heads", m.transformer_heads},
          {"upsampling", to_string(m.upsampling)},
          {"activation", to_string(m.activation)},
          {"base_channels", m.base_channels},
          {"slice_pool", to_string(m.slice_pool)},
          {"input_edge", m.input_edge},
          {"embed_width", m.embed_width},
          {"patch_size", m.patch_size},
          {"image_depth", m.image_depth},
          {"mlp_hidden", m.mlp_hidden},
          {"encoder_dropout", m.encoder_dropout},
          {"freeze_encoder", m.freeze_encoder}};
}

inline void read_model_fields(detail::ObjectReader& r, ModelSpec& m) {
  r.get_enum("architecture", m.architecture, detail::kArchitectureNames);
  r.get("learning_rate", m.learning_rate);
  r.get("dropout_ratio", m.dropout_ratio);
  r.get("reg_coeff", m.reg_coeff);
  r.get("transformer_depth", m.transformer_depth);
  r.get("transformer_heads", m.transformer_heads);
  r.get_enum("upsampling", m.upsampling, detail::kUpsamplingNames);
  r.get_enum("activation", m.activation, detail::kActivationNames);
  r.get("base_channels", m.base_channels);
  r.get_enum("slice_pool", m.slice_pool, detail::kSlicePoolNames);
  r.get("input_edge", m.input_edge);
  r.get("embed_width", m.embed_width);
  r.get("patch_size", m.patch_size);
  r.get("image_depth", m.image_depth);
  r.get("mlp_hidden", m.mlp_hidden);
  r.get("encoder_dropout", m.encoder_dropout);
  r.get("freeze_encoder", m.freeze_encoder);
}

inline ModelSpec model_spec_from_json(const Json& j, const std::string& where = "model") {
  ModelSpec m;
  detail::ObjectReader r(j, where);
  read_model_fields(r, m);
  r.finish();
  return m;
}

inline Json to_json(const PhantomParams& p) {
  return {{"edge", p.edge},
          {"s_min", p.s_min},
          {"s_max", p.s_max},
          {"lesion_probability", p.lesion_probability},
          {"lesion_radius_min", p.lesion_radius_min},
          {"lesion_radius_max", p.lesion_radius_max},
          {"noise_level", p.noise_level},
          {"seed", p.seed}};
}

inline PhantomParams phantom_params_from_json(const Json& j, const std::string& where = "phantoms") {
  PhantomParams p;
  detail::ObjectReader r(j, where);
  r.get("edge", p.edge);
  r.get("s_min", p.s_min);
  r.get("s_max", p.s_max);
  r.get("lesion_probability", p.lesion_probability);
  r.get("lesion_radius_min", p.lesion_radius_min);
  r.get("lesion_radius_max", p.lesion_radius_max);
  r.get("noise_level", p.noise_level);
  r.get("seed", p.seed);
  r.finish();
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return p;
}

struct DataConfig {
  enum class Source { phantoms, manifest };
  Source source = Source::phantoms;
  PhantomParams phantoms;
  std::size_t train_count = 200;
  std::size_t validation_count = 50;
  std::filesystem::path manifest;
  double train_fraction = 0.8;
  IntensityScaling scaling = IntensityScaling::min_max;
  std::uint64_t split_seed = 0;  // shared by every run on this data, independent of the training seed
};

inline Json to_json(const DataConfig& d) {
  if (d.source == DataConfig::Source::phantoms) {
    return {{"phantoms", to_json(d.phantoms)},
            {"train_count", d.train_count},
            {"validation_count", d.validation_count},
            {"split_seed", d.split_seed}};
  }
  return {{"manifest", d.manifest.generic_string()},
          {"train_fraction", d.train_fraction},
          {"scaling", to_string(d.scaling)},
          {"split_seed", d.split_seed}};
}

inline Json to_json(const AugmentParams& a, bool enabled) {
  return {{"enabled", enabled},
          {"max_rotation_deg", a.max_rotation_deg},
          {"max_shift_px", a.max_shift_px},
          {"flip_probability", a.flip_probability}};
}

inline Json to_json(const LossConfig& l) { return {{"lambda_recon", l.lambda_recon}, {"bce_clamp", l.bce_clamp}}; }

// ---------------------------------------------------------------- experiment

struct ExperimentConfig {
  std::string name;  // report label; defaults to the architecture name
  ModelSpec model;
  LossConfig loss;
  DataConfig data;
  AugmentParams augment;
  bool augment_enabled = true;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;
  std::filesystem::path output_dir;  // empty: under the output root

  std::string label() const { return name.empty() ? std::string(to_string(model.architecture)) : name; }

  /// Model spec as built for training; the experiment owns the epoch count.
  ModelSpec build_spec() const {
    ModelSpec s = model;
    s.epochs = std::max<std::size_t>(1, epochs);
    return s;
  }

  void validate(bool check_paths = true) const {
    const auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    try {
      build_spec().validate();
      loss.validate();
      augment.validate();
      if (data.source == DataConfig::Source::phantoms) data.phantoms.validate();
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    if (eval_every < 1) fail("eval_every must be >= 1");
    if (data.source == DataConfig::Source::phantoms) {
      if (data.train_count < 1 || data.validation_count < 1) fail("train_count and validation_count must be >= 1");
    } else {
      if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) fail("data.train_fraction must lie in (0, 1)");
      if (check_paths && !std::filesystem::exists(data.manifest)) fail("manifest '" + data.manifest.string() + "' does not exist");
    }
  }
};

inline Json to_json(const ExperimentConfig& c) {
  Json j = {{"schema_version", kConfigSchemaVersion},
            {"name", c.name},
            {"model", to_json(c.model)},
            {"loss", to_json(c.loss)},
            {"data", to_json(c.data)},
            {"augment", to_json(c.augment, c.augment_enabled)},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"eval_every", c.eval_every},
            {"output_dir", c.output_dir.generic_string()}};
  return j;
}

/// Relative paths (manifest, output_dir) resolve against `base_dir`.
inline ExperimentConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {},
                                         bool check_paths = true) {
  ExperimentConfig c;
  detail::ObjectReader r(j, "config");
  int version = 0;
  r.require("schema_version", version);
  if (version != kConfigSchemaVersion) {
    throw ConfigError("config: schema_version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kConfigSchemaVersion) + ")");
  }
  r.get("name", c.name);
  if (const auto* m = r.child("model")) c.model = model_spec_from_json(*m, "config.model");
  if (const auto* l = r.child("loss")) {
    detail::ObjectReader lr(*l, "config.loss");
    lr.get("lambda_recon", c.loss.lambda_recon);
    lr.get("bce_clamp", c.loss.bce_clamp);
    lr.finish();
  }
  if (const auto* d = r.child("data")) {
    detail::ObjectReader dr(*d, "config.data");
    if (dr.has("phantoms") == dr.has("manifest")) throw ConfigError("config.data: give exactly one of phantoms or manifest");
    if (const auto* p = dr.child("phantoms")) {
      c.data.source = DataConfig::Source::phantoms;
      c.data.phantoms = phantom_params_from_json(*p, "config.data.phantoms");
      dr.get("train_count", c.data.train_count);
      dr.get("validation_count", c.data.validation_count);
    } else {
      c.data.source = DataConfig::Source::manifest;
      std::string path;
      dr.get("manifest", path);
      c.data.manifest = std::filesystem::path(path).is_relative() ? base_dir / path : std::filesystem::path(path);
      dr.get("train_fraction", c.data.train_fraction);
      dr.get_enum("scaling", c.data.scaling, detail::kScalingNames);
    }
    dr.get("split_seed", c.data.split_seed);
    dr.finish();
  }
  if (const auto* a = r.child("augment")) {
    detail::ObjectReader ar(*a, "config.augment");
    ar.get("enabled", c.augment_enabled);
    ar.get("max_rotation_deg", c.augment.max_rotation_deg);
    ar.get("max_shift_px", c.augment.max_shift_px);
    ar.get("flip_probability", c.augment.flip_probability);
    ar.finish();
  }
  r.get("epochs", c.epochs);
  r.get("seed", c.seed);
  r.get("eval_every", c.eval_every);
  std::string out;
  r.get("output_dir", out);
  if (!out.empty()) c.output_dir = std::filesystem::path(out).is_relative() ? base_dir / out : std::filesystem::path(out);
  r.finish();
  c.validate(check_paths);
  return c;
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("'" + path.string() + "': " + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path), path.parent_path());
}

/// Identity of a run for checkpoint compatibility: the canonical config
/// without the fields a resume may change (epochs, output_dir, name).
inline std::string config_digest(const ExperimentConfig& c) {
  Json j = to_json(c);
  j.erase("epochs");
  j.erase("output_dir");
  j.erase("name");
  return detail::hex64(detail::fnv1a64(j.dump()));
}

/// Where a run writes when its config names no output_dir.
inline std::filesystem::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

inline std::filesystem::path resolve_output_dir(const ExperimentConfig& c) {
  if (!c.output_dir.empty()) return c.output_dir;
  return output_root() / (c.label() + "-" + config_digest(c));
}

}  // namespace roixai
