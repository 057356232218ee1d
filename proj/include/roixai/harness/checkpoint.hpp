#pragma once

// Checkpoint file: 8-byte magic "ROIXCKPT", u64 little-endian header length,
// a compact JSON header, then raw little-endian float32 blobs in the order
// the header lists them. Offsets in the header are relative to the first blob.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "roixai/harness/record.hpp"
#include "roixai/models/zoo.hpp"

namespace roixai {

inline constexpr char kCheckpointMagic[9] = "ROIXCKPT";
inline constexpr int kCheckpointSchemaVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Output could not be written completely; the file named may be partial.
class PartialOutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to continue training exactly where it stopped.
struct TrainingState {
  ExperimentConfig config;
  std::unique_ptr<Model<float>> model;
  Adam<float> optimizer;
  Rng rng;
  std::size_t epoch = 0;
  RunRecord record;  // history so far; wall time is not persisted
};

inline std::uint64_t model_init_seed(const ExperimentConfig& c) { return derive_seed(c.seed, 0); }
inline std::uint64_t training_rng_seed(const ExperimentConfig& c) { return derive_seed(c.seed, 1); }

inline TrainingState initial_state(const ExperimentConfig& config) {
  TrainingState s;
  s.config = config;
  s.model = build_model<float>(config.build_spec(), model_init_seed(config));
  s.optimizer = make_optimizer<float>(s.model->spec());
  s.rng = Rng(training_rng_seed(config));
  s.record.config = config;
  s.record.digest = config_digest(config);
  return s;
}

namespace detail {

struct BlobRef {
  std::string name, role;
  Shape shape;
  const float* data;
  std::size_t count;
};

inline std::vector<BlobRef> checkpoint_blobs(const TrainingState& s) {
  std::vector<BlobRef> blobs;
  for (const auto& p : s.model->store().parameters())
    blobs.push_back({p.name, "parameter", p.tensor.shape(), p.tensor.values().data(), p.tensor.numel()});
  for (const auto& b : s.model->store().buffers())
    blobs.push_back({b.name, "buffer", b.tensor.shape(), b.tensor.values().data(), b.tensor.numel()});
  for (const auto& [name, mom] : s.optimizer.moments()) {
    blobs.push_back({name, "adam_m", {mom.m.size()}, mom.m.data(), mom.m.size()});
    blobs.push_back({name, "adam_v", {mom.v.size()}, mom.v.data(), mom.v.size()});
  }
  return blobs;
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const TrainingState& s) {
  static_assert(std::endian::native == std::endian::little, "checkpoint blobs are written in host order");
  const auto blobs = detail::checkpoint_blobs(s);
  Json index = Json::array();
  std::size_t offset = 0;
  for (const auto& b : blobs) {
    index.push_back({{"name", b.name}, {"role", b.role}, {"dtype", "<f4"}, {"shape", b.shape}, {"offset", offset},
                     {"nbytes", b.count * 4}});
    offset += b.count * 4;
  }
  const Json header = {{"format", "roixai-checkpoint"},
                       {"schema_version", kCheckpointSchemaVersion},
                       {"config", to_json(s.config)},
                       {"config_digest", config_digest(s.config)},
                       {"epoch", s.epoch},
                       {"optimizer", {{"steps", s.optimizer.steps()}}},
                       {"rng_state", s.rng.state()},
                       {"history", history_json(s.record)},
                       {"blobs", index}};
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 8);
  detail::put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& b : blobs) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(b.data);
    out.insert(out.end(), p, p + b.count * 4);
  }
  return out;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw PartialOutputError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  f.flush();
  if (!f) throw PartialOutputError("write to '" + path.string() + "' failed; the file may be incomplete");
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline void save_checkpoint(const std::filesystem::path& path, const TrainingState& s) {
  write_file_bytes(path, encode_checkpoint(s));
}

struct CheckpointFile {
  Json header;
  std::vector<std::uint8_t> blob_bytes;

  ExperimentConfig config(bool check_paths = false) const { return config_from_json(header.at("config"), {}, check_paths); }

  std::vector<float> blob(const Json& entry) const {
    const auto off = entry.at("offset").get<std::size_t>(), n = entry.at("nbytes").get<std::size_t>();
    if (entry.at("dtype") != "<f4" || n % 4 != 0 || off + n > blob_bytes.size()) {
      throw CheckpointError("checkpoint: blob '" + entry.at("name").get<std::string>() + "' is out of bounds");
    }
    std::vector<float> v(n / 4);
    if (n) std::memcpy(v.data(), blob_bytes.data() + off, n);
    return v;
  }
};

inline CheckpointFile decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) throw CheckpointError("checkpoint: bad magic");
  std::uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = (len << 8) | bytes[8 + static_cast<std::size_t>(i)];
  if (bytes.size() < 16 + len) throw CheckpointError("checkpoint: truncated header");
  CheckpointFile f;
  try {
    f.header = Json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const Json::parse_error& e) {
    throw CheckpointError(std::string("checkpoint: malformed header: ") + e.what());
  }
  if (f.header.value("format", "") != "roixai-checkpoint" || f.header.value("schema_version", 0) != kCheckpointSchemaVersion) {
    throw CheckpointError("checkpoint: unsupported format or schema version");
  }
  f.blob_bytes.assign(bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len), bytes.end());
  std::size_t need = 0;
  for (const auto& b : f.header.at("blobs")) need = std::max(need, b.at("offset").get<std::size_t>() + b.at("nbytes").get<std::size_t>());
  if (f.blob_bytes.size() < need) throw CheckpointError("checkpoint: truncated payload");
  return f;
}

inline CheckpointFile read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

namespace detail {
inline void copy_into(Tensor<float>& t, const std::vector<float>& v, const Json& entry) {
  if (entry.at("shape").get<Shape>() != t.shape() || v.size() != t.numel()) {
    throw CheckpointError("checkpoint: '" + entry.at("name").get<std::string>() + "' has shape " +
                          shape_str(entry.at("shape").get<Shape>()) + ", model expects " + shape_str(t.shape()));
  }
  auto w = t.mutable_values();
  std::copy(v.begin(), v.end(), w.begin());
}
}  // namespace detail

/// Rebuilds the model and training state stored in `file`.
inline TrainingState restore_state(const CheckpointFile& file, const ExperimentConfig& config) {
  TrainingState s = initial_state(config);
  std::map<std::string, Tensor<float>> params, buffers;
  for (const auto& p : s.model->store().parameters()) params.emplace(p.name, p.tensor);
  for (const auto& b : s.model->store().buffers()) buffers.emplace(b.name, b.tensor);
  std::size_t seen_params = 0, seen_buffers = 0;
  for (const auto& e : file.header.at("blobs")) {
    const auto name = e.at("name").get<std::string>(), role = e.at("role").get<std::string>();
    const auto v = file.blob(e);
    if (role == "parameter" || role == "buffer") {
      auto& table = role == "parameter" ? params : buffers;
      const auto it = table.find(name);
      if (it == table.end()) throw CheckpointError("checkpoint: model has no " + role + " '" + name + "'");
      detail::copy_into(it->second, v, e);
      ++(role == "parameter" ? seen_params : seen_buffers);
    } else if (role == "adam_m" || role == "adam_v") {
      auto& mom = s.optimizer.moments()[name];
      (role == "adam_m" ? mom.m : mom.v) = v;
    } else {
      throw CheckpointError("checkpoint: unknown blob role '" + role + "'");
    }
  }
  if (seen_params != params.size() || seen_buffers != buffers.size()) {
    throw CheckpointError("checkpoint: parameter set does not match the model");
  }
  s.optimizer.set_steps(file.header.at("optimizer").at("steps").get<std::size_t>());
  s.rng.set_state(file.header.at("rng_state").get<std::string>());
  s.epoch = file.header.at("epoch").get<std::size_t>();
  read_history(file.header.at("history"), s.record);
  return s;
}

/// State for continuing training under `config`; its digest must match the checkpoint's.
inline TrainingState resume_state(const CheckpointFile& file, const ExperimentConfig& config) {
  const auto stored = file.header.at("config_digest").get<std::string>();
  const auto wanted = config_digest(config);
  if (stored != wanted) {
    throw CheckpointError("checkpoint digest " + stored + " does not match the config digest " + wanted);
  }
  const auto epoch = file.header.at("epoch").get<std::size_t>();
  if (epoch > config.epochs) {
    throw CheckpointError("checkpoint is at epoch " + std::to_string(epoch) + ", past the configured " +
                          std::to_string(config.epochs));
  }
  return restore_state(file, config);
}

/// Model only, configured as stored in the checkpoint.
inline std::unique_ptr<Model<float>> load_model(const std::filesystem::path& path) {
  const auto file = read_checkpoint(path);
  return std::move(restore_state(file, file.config()).model);
}

}  // namespace roixai
