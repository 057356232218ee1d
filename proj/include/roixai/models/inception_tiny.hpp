#pragma once

#include "roixai/models/model.hpp"

namespace roixai {

/// Three parallel branches (1×1; 1×1 then 3×3; 3×3 max-pool then 1×1)
/// concatenated along channels, then batch norm and ReLU.
template <class T>
class InceptionBlock {
 public:
  InceptionBlock() = default;
  InceptionBlock(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    const std::size_t quarter = out / 4, half = out / 2;
    b1_ = Conv2d<T>(store, name + ".b1", conv_spec(in, quarter, 1, 1, 0), rng);
    b2_reduce_ = Conv2d<T>(store, name + ".b2_reduce", conv_spec(in, quarter, 1, 1, 0), rng);
    b2_ = Conv2d<T>(store, name + ".b2", conv_spec(quarter, half, 3, 1, 1), rng);
    b3_ = Conv2d<T>(store, name + ".b3", conv_spec(in, out - quarter - half, 1, 1, 0), rng);
    bn_ = BatchNorm2d<T>(store, name + ".bn", out);
  }

  Tensor<T> operator()(const Tensor<T>& x, bool training) {
    auto a = b1_(x);
    auto b = b2_(relu(b2_reduce_(x)));
    auto c = b3_(max_pool2d(x, 3, 1, 1));
    return relu(bn_(concat<T>({a, b, c}, 1), training));
  }

 private:
  Conv2d<T> b1_, b2_reduce_, b2_, b3_;
  BatchNorm2d<T> bn_;
};

/// Inception-style classifier: strided stem, three branch blocks separated by
/// max-pool and dropout, global average pooling, slice pooling, sigmoid head.
/// reg_coeff acts as decoupled weight decay in the optimizer.
template <class T>
class InceptionTiny final : public Model<T> {
 public:
  InceptionTiny(ModelSpec spec, std::uint64_t seed) : Model<T>(std::move(spec)) {
    Rng rng(seed);
    auto& s = this->store_;
    const auto& c = this->spec_.base_channels;
    stem_ = Conv2d<T>(s, "stem.conv", conv_spec(1, c[0] / 2, 3, 2, 1, false), rng);
    stem_bn_ = BatchNorm2d<T>(s, "stem.bn", c[0] / 2);
    blocks_.emplace_back(s, "block1", c[0] / 2, c[0], rng);
    blocks_.emplace_back(s, "block2", c[0], c[1], rng);
    blocks_.emplace_back(s, "block3", c[1], c[2], rng);
    head_ = Linear<T>(s, "head", c[2], 1, rng);
    this->taps_.declare("stem");
    this->taps_.declare("block1");
    this->taps_.declare("block2");
    this->taps_.declare("final_conv");
  }

  ForwardOutput<T> forward(const Tensor<T>& slices, const ForwardContext& ctx) override {
    this->check_input(slices);
    auto h = relu(stem_bn_(stem_(slices), ctx.training));
    this->taps_.capture("stem", h);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      h = blocks_[i](h, ctx.training);
      if (i + 1 == blocks_.size()) break;
      this->taps_.capture(i == 0 ? "block1" : "block2", h);
      h = max_pool2d(h, 2);
      if (ctx.training) h = dropout(h, this->spec_.dropout_ratio, true, ctx.require_rng());
    }
    this->taps_.capture("final_conv", h);
    return {head_(this->pool_slices(global_avg_pool(h))), {}};
  }

  std::vector<Tensor<T>> final_layer() const override { return {head_.weight(), head_.bias()}; }
  std::string default_tap() const override { return "final_conv"; }

 private:
  Conv2d<T> stem_;
  BatchNorm2d<T> stem_bn_;
  std::vector<InceptionBlock<T>> blocks_;
  Linear<T> head_;
};

}  // namespace roixai
