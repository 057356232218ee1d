#pragma once

#include "roixai/models/model.hpp"

namespace roixai {

template <class T>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out, std::size_t stride,
                Rng& rng)
      : conv1_(store, name + ".conv1", conv_spec(in, out, 3, stride, 1, false), rng),
        bn1_(store, name + ".bn1", out),
        conv2_(store, name + ".conv2", conv_spec(out, out, 3, 1, 1, false), rng),
        bn2_(store, name + ".bn2", out),
        projected_(in != out || stride != 1) {
    if (projected_) {
      proj_ = Conv2d<T>(store, name + ".proj", conv_spec(in, out, 1, stride, 0, false), rng);
      proj_bn_ = BatchNorm2d<T>(store, name + ".proj_bn", out);
    }
  }

  Tensor<T> operator()(const Tensor<T>& x, bool training) {
    auto h = relu(bn1_(conv1_(x), training));
    h = bn2_(conv2_(h), training);
    const auto shortcut = projected_ ? proj_bn_(proj_(x), training) : x;
    return relu(add(h, shortcut));
  }

 private:
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  bool projected_ = false;
  Conv2d<T> proj_;
  BatchNorm2d<T> proj_bn_;
};

/// Residual classifier: stem, four residual blocks (the middle two downsample),
/// global average pooling per slice, slice pooling, dropout, sigmoid head.
template <class T>
class ResNetTiny final : public Model<T> {
 public:
  ResNetTiny(ModelSpec spec, std::uint64_t seed) : Model<T>(std::move(spec)) {
    Rng rng(seed);
    auto& s = this->store_;
    const auto& c = this->spec_.base_channels;
    stem_ = Conv2d<T>(s, "stem.conv", conv_spec(1, c[0], 3, 1, 1, false), rng);
    stem_bn_ = BatchNorm2d<T>(s, "stem.bn", c[0]);
    blocks_.emplace_back(s, "block1", c[0], c[0], 1, rng);
    blocks_.emplace_back(s, "block2", c[0], c[1], 2, rng);
    blocks_.emplace_back(s, "block3", c[1], c[2], 2, rng);
    blocks_.emplace_back(s, "block4", c[2], c[2], 1, rng);
    head_ = Linear<T>(s, "head", c[2], 1, rng);
    this->taps_.declare("stem");
    this->taps_.declare("block1");
    this->taps_.declare("block2");
    this->taps_.declare("block3");
    this->taps_.declare("final_conv");
  }

  ForwardOutput<T> forward(const Tensor<T>& slices, const ForwardContext& ctx) override {
    this->check_input(slices);
    auto h = max_pool2d(relu(stem_bn_(stem_(slices), ctx.training)), 2);
    this->taps_.capture("stem", h);
    static const char* names[] = {"block1", "block2", "block3", "final_conv"};
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      h = blocks_[i](h, ctx.training);
      this->taps_.capture(names[i], h);
    }
    auto pooled = this->pool_slices(global_avg_pool(h));
    if (ctx.training) pooled = dropout(pooled, this->spec_.dropout_ratio, true, ctx.require_rng());
    return {head_(pooled), {}};
  }

  std::vector<Tensor<T>> final_layer() const override { return {head_.weight(), head_.bias()}; }
  std::string default_tap() const override { return "final_conv"; }

 private:
  Conv2d<T> stem_;
  BatchNorm2d<T> stem_bn_;
  std::vector<ResidualBlock<T>> blocks_;
  Linear<T> head_;
};

}  // namespace roixai
