#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "roixai/core/tap.hpp"
#include "roixai/models/model_spec.hpp"

namespace roixai {

struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout

  Rng& require_rng() const {
    if (!rng) throw std::logic_error("forward: training mode needs a random generator");
    return *rng;
  }
};

template <class T>
struct ForwardOutput {
  Tensor<T> logit;           // [1, 1], classifiers only
  Tensor<T> reconstruction;  // [s, 1, H, W], reconstructors only
};

/// Common surface of every zoo model. Input is one volume as a slice batch
/// [s, 1, H, W]; classifiers produce a single volume-level logit.
template <class T>
class Model {
 public:
  explicit Model(ModelSpec spec) : spec_(std::move(spec)) { spec_.validate(); }
  virtual ~Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  virtual ForwardOutput<T> forward(const Tensor<T>& slices, const ForwardContext& ctx) = 0;

  /// Parameters the optimizer updates.
  virtual std::vector<NamedTensor<T>> trainable_parameters() const { return store_.parameters(); }

  /// Weight and bias of the layer producing the logit.
  virtual std::vector<Tensor<T>> final_layer() const = 0;

  /// Attribution tap per the layer-selection rule of this architecture.
  virtual std::string default_tap() const = 0;

  const ModelSpec& spec() const { return spec_; }
  ParameterStore<T>& store() { return store_; }
  const ParameterStore<T>& store() const { return store_; }
  TapRegistry<T>& taps() { return taps_; }

  bool is_classifier() const { return roixai::is_classifier(spec_.architecture); }
  bool is_reconstructor() const { return roixai::is_reconstructor(spec_.architecture); }

 protected:
  void check_input(const Tensor<T>& slices) const {
    if (slices.rank() != 4 || slices.dim(1) != 1) {
      throw std::invalid_argument("model input must be [slices, 1, H, W], got " + shape_str(slices.shape()));
    }
    if (slices.dim(0) == 0) throw std::invalid_argument("model input has no slices");
    const std::size_t d = spec_.required_divisor();
    if (slices.dim(2) % d != 0 || slices.dim(3) % d != 0) {
      throw std::invalid_argument("slice extent " + std::to_string(slices.dim(2)) + "x" + std::to_string(slices.dim(3)) +
                                  " must be divisible by " + std::to_string(d));
    }
  }

  Tensor<T> pool_slices(const Tensor<T>& features) const {
    return spec_.slice_pool == SlicePool::max ? max_over(features, 0) : mean_over(features, 0);
  }

  ModelSpec spec_;
  ParameterStore<T> store_;
  TapRegistry<T> taps_;
};

}  // namespace roixai
