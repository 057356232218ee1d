#pragma once

#include <cmath>

#include "roixai/models/model.hpp"

namespace roixai {

/// Pre-norm transformer block: x + attn(LN x), then x + MLP(LN x) with GELU.
template <class T>
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(ParameterStore<T>& store, const std::string& name, std::size_t width, std::size_t heads, Rng& rng)
      : ln1_(store, name + ".ln1", width),
        attn_(store, name + ".attn", width, heads, rng),
        ln2_(store, name + ".ln2", width),
        fc1_(store, name + ".fc1", width, 2 * width, rng),
        fc2_(store, name + ".fc2", 2 * width, width, rng) {}

  Tensor<T> operator()(const Tensor<T>& x, const std::vector<std::uint8_t>* key_mask = nullptr) const {
    auto h = add(x, attn_(ln1_(x), key_mask));
    return add(h, fc2_(gelu(fc1_(ln2_(h)))));
  }

 private:
  LayerNorm<T> ln1_;
  MultiHeadAttention<T> attn_;
  LayerNorm<T> ln2_;
  Linear<T> fc1_, fc2_;
};

/// Fixed sinusoidal position table [length, width].
template <class T>
Tensor<T> sinusoidal_positions(std::size_t length, std::size_t width) {
  std::vector<T> v(length * width);
  for (std::size_t p = 0; p < length; ++p)
    for (std::size_t i = 0; i < width; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
      v[p * width + i] = static_cast<T>(i % 2 == 0 ? std::sin(p * freq) : std::cos(p * freq));
    }
  return Tensor<T>::from({length, width}, std::move(v));
}

/// Two-stage transformer: a patch transformer embeds each slice into its
/// classification token; a sequence transformer over the slice embeddings,
/// with its own prepended classification token, produces the volume logit.
template <class T>
class VitTwoStage final : public Model<T> {
 public:
  VitTwoStage(ModelSpec spec, std::uint64_t seed) : Model<T>(std::move(spec)) {
    Rng rng(seed);
    auto& s = this->store_;
    const auto& sp = this->spec_;
    const std::size_t D = sp.embed_width;
    const std::size_t grid = sp.input_edge / sp.patch_size;
    tokens_ = grid * grid + 1;
    // Learned tokens start at the scale of unit-variance embeddings so layer
    // norm sees a well-conditioned input from the first step.
    const double token_std = 1.0 / std::sqrt(static_cast<double>(D));
    patch_ = Conv2d<T>(s, "image.patch", conv_spec(1, D, sp.patch_size, sp.patch_size, 0), rng);
    image_cls_ = s.add_parameter("image.cls", {1, 1, D}, detail::normal_values<T>(D, token_std, rng));
    image_pos_ = s.add_parameter("image.pos", {tokens_, D}, detail::normal_values<T>(tokens_ * D, token_std, rng));
    for (std::size_t i = 0; i < sp.image_depth; ++i)
      image_blocks_.emplace_back(s, "image.block" + std::to_string(i), D, sp.transformer_heads, rng);
    image_ln_ = LayerNorm<T>(s, "image.ln", D);
    seq_cls_ = s.add_parameter("sequence.cls", {1, 1, D}, detail::normal_values<T>(D, token_std, rng));
    for (std::size_t i = 0; i < sp.transformer_depth; ++i)
      seq_blocks_.emplace_back(s, "sequence.block" + std::to_string(i), D, sp.transformer_heads, rng);
    seq_ln_ = LayerNorm<T>(s, "sequence.ln", D);
    head_ = Linear<T>(s, "head", D, 1, rng);
    this->taps_.declare("patch_embed");
    this->taps_.declare("slice_embeddings");
  }

  ForwardOutput<T> forward(const Tensor<T>& slices, const ForwardContext& ctx) override {
    return forward_padded(slices, slices.rank() == 4 ? slices.dim(0) : 0, ctx);
  }

  /// Runs a slice batch whose trailing slices beyond `valid` are padding; the
  /// padding is excluded from sequence attention.
  ForwardOutput<T> forward_padded(const Tensor<T>& slices, std::size_t valid, const ForwardContext&) {
    this->check_input(slices);
    const auto& sp = this->spec_;
    if (slices.dim(2) != sp.input_edge || slices.dim(3) != sp.input_edge) {
      throw std::invalid_argument("vit_two_stage: slices must be " + std::to_string(sp.input_edge) + "x" +
                                  std::to_string(sp.input_edge));
    }
    const std::size_t s = slices.dim(0), D = sp.embed_width;
    if (valid == 0 || valid > s) throw std::invalid_argument("vit_two_stage: valid slice count out of range");

    auto fmap = patch_(slices);
    this->taps_.capture("patch_embed", fmap);
    auto x = transpose_last2(reshape(fmap, {s, D, tokens_ - 1}));
    x = add_broadcast(concat<T>({repeat_leading(image_cls_, s), x}, 1), image_pos_);
    for (const auto& b : image_blocks_) x = b(x);
    auto emb = reshape(narrow(image_ln_(x), 1, 0, 1), {1, s, D});
    this->taps_.capture("slice_embeddings", emb);

    auto seq = concat<T>({seq_cls_, emb}, 1);
    seq = add_broadcast(seq, sinusoidal_positions<T>(s + 1, D));
    std::vector<std::uint8_t> mask(s + 1, 0);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(valid + 1), std::uint8_t{1});
    const bool padded = valid < s;
    for (const auto& b : seq_blocks_) seq = b(seq, padded ? &mask : nullptr);
    auto cls = reshape(narrow(seq_ln_(seq), 1, 0, 1), {1, D});
    return {head_(cls), {}};
  }

  std::vector<Tensor<T>> final_layer() const override { return {head_.weight(), head_.bias()}; }
  std::string default_tap() const override { return "patch_embed"; }

 private:
  std::size_t tokens_ = 0;
  Conv2d<T> patch_;
  Tensor<T> image_cls_, image_pos_;
  std::vector<TransformerBlock<T>> image_blocks_;
  LayerNorm<T> image_ln_;
  Tensor<T> seq_cls_;
  std::vector<TransformerBlock<T>> seq_blocks_;
  LayerNorm<T> seq_ln_;
  Linear<T> head_;
};

}  // namespace roixai
