#pragma once

#include "roixai/models/model.hpp"

namespace roixai {

/// Two 3×3 convolutions. The hybrid's encoder variant inserts instance norm,
/// LeakyReLU and dropout after each convolution.
template <class T>
class UNetConvBlock {
 public:
  UNetConvBlock() = default;
  UNetConvBlock(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out, Activation act,
                bool normalized, double dropout_rate, Rng& rng)
      : act_(normalized ? Activation::leaky_relu : act), normalized_(normalized), dropout_rate_(dropout_rate) {
    conv1_ = Conv2d<T>(store, name + ".conv1", conv_spec(in, out, 3, 1, 1, !normalized), rng);
    conv2_ = Conv2d<T>(store, name + ".conv2", conv_spec(out, out, 3, 1, 1, !normalized), rng);
    if (normalized) {
      norm1_ = InstanceNorm2d<T>(store, name + ".norm1", out);
      norm2_ = InstanceNorm2d<T>(store, name + ".norm2", out);
    }
  }

  Tensor<T> operator()(const Tensor<T>& x, const ForwardContext& ctx) const {
    auto h = stage(conv1_(x), norm1_, ctx);
    return stage(conv2_(h), norm2_, ctx);
  }

 private:
  Tensor<T> stage(Tensor<T> h, const InstanceNorm2d<T>& norm, const ForwardContext& ctx) const {
    if (normalized_) h = norm(h);
    h = activate(h, act_);
    if (ctx.training && dropout_rate_ > 0.0) h = dropout(h, dropout_rate_, true, ctx.require_rng());
    return h;
  }

  Activation act_ = Activation::relu;
  bool normalized_ = false;
  double dropout_rate_ = 0.0;
  Conv2d<T> conv1_, conv2_;
  InstanceNorm2d<T> norm1_, norm2_;
};

/// Encoder-decoder with skip connections. Levels follow base_channels; each
/// decoder level upsamples (transposed conv k2 s2, or bilinear ×2 then 1×1
/// conv), concatenates the matching encoder output, and applies a conv block.
/// With `hybrid` set, the encoder uses normalized blocks and a two-layer
/// perceptron on the slice-pooled bottleneck produces a volume logit.
template <class T>
class UNet final : public Model<T> {
 public:
  UNet(ModelSpec spec, std::uint64_t seed) : Model<T>(std::move(spec)) {
    Rng rng(seed);
    auto& s = this->store_;
    const auto& sp = this->spec_;
    const auto& c = sp.base_channels;
    hybrid_ = sp.architecture == Architecture::unet_mlp;
    const std::size_t L = c.size();
    for (std::size_t l = 0; l < L; ++l) {
      encoder_.emplace_back(s, "encoder" + std::to_string(l), l == 0 ? 1 : c[l - 1], c[l], sp.activation, hybrid_,
                            hybrid_ ? sp.encoder_dropout : 0.0, rng);
    }
    encoder_param_count_ = s.parameters().size();
    for (std::size_t l = L - 1; l-- > 0;) {
      const std::string name = "decoder" + std::to_string(l);
      Up up;
      if (sp.upsampling == Upsampling::transposed_conv) {
        LayerSpec t;
        t.kind = LayerKind::conv_transposed;
        t.in_channels = c[l + 1];
        t.out_channels = c[l];
        t.kernel = 2;
        t.stride = 2;
        up.transposed = ConvTranspose2d<T>(s, name + ".up", t, rng);
      } else {
        up.pointwise = Conv2d<T>(s, name + ".up", conv_spec(c[l + 1], c[l], 1, 1, 0), rng);
      }
      ups_.push_back(std::move(up));
      decoder_.emplace_back(s, name + ".block", 2 * c[l], c[l], sp.activation, false, 0.0, rng);
    }
    out_ = Conv2d<T>(s, "output", conv_spec(c[0], 1, 1, 1, 0), rng);
    if (hybrid_) {
      mlp1_ = Linear<T>(s, "mlp.fc1", c.back(), sp.mlp_hidden, rng);
      mlp2_ = Linear<T>(s, "mlp.fc2", sp.mlp_hidden, 1, rng);
    }
    for (std::size_t l = 0; l + 1 < L; ++l) this->taps_.declare("encoder" + std::to_string(l));
    this->taps_.declare("encoder_final_conv");
    for (std::size_t l = L - 1; l-- > 0;) this->taps_.declare("decoder" + std::to_string(l));
  }

  ForwardOutput<T> forward(const Tensor<T>& slices, const ForwardContext& ctx) override {
    this->check_input(slices);
    const std::size_t L = encoder_.size();
    std::vector<Tensor<T>> skips;
    Tensor<T> h = slices;
    for (std::size_t l = 0; l < L; ++l) {
      if (l > 0) h = max_pool2d(h, 2);
      h = encoder_[l](h, ctx);
      this->taps_.capture(l + 1 == L ? "encoder_final_conv" : "encoder" + std::to_string(l), h);
      if (l + 1 < L) skips.push_back(h);
    }
    const Tensor<T> latent = h;
    for (std::size_t i = 0; i + 1 < L; ++i) {
      const std::size_t l = L - 2 - i;
      const Up& up = ups_[i];
      h = up.transposed.defined() ? up.transposed(h) : up.pointwise(upsample_bilinear(h, 2));
      h = decoder_[i](concat<T>({h, skips[l]}, 1), ctx);
      this->taps_.capture("decoder" + std::to_string(l), h);
    }
    ForwardOutput<T> out;
    out.reconstruction = out_(h);
    if (hybrid_) {
      auto pooled = this->pool_slices(global_avg_pool(latent));
      out.logit = mlp2_(relu(mlp1_(pooled)));
    }
    return out;
  }

  std::vector<NamedTensor<T>> trainable_parameters() const override {
    const auto& all = this->store_.parameters();
    if (!this->spec_.freeze_encoder) return all;
    return {all.begin() + static_cast<std::ptrdiff_t>(encoder_param_count_), all.end()};
  }

  std::vector<Tensor<T>> final_layer() const override {
    if (hybrid_) return {mlp2_.weight(), mlp2_.bias()};
    return {out_.weight(), this->store_.parameter("output.bias")};
  }

  std::string default_tap() const override { return "encoder_final_conv"; }

 private:
  struct Up {
    ConvTranspose2d<T> transposed;
    Conv2d<T> pointwise;
  };

  bool hybrid_ = false;
  std::size_t encoder_param_count_ = 0;
  std::vector<UNetConvBlock<T>> encoder_;
  std::vector<Up> ups_;
  std::vector<UNetConvBlock<T>> decoder_;
  Conv2d<T> out_;
  Linear<T> mlp1_, mlp2_;
};

}  // namespace roixai
