#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "roixai/data/volume.hpp"
#include "roixai/models/inception_tiny.hpp"
#include "roixai/models/loss.hpp"
#include "roixai/models/optim.hpp"
#include "roixai/models/resnet_tiny.hpp"
#include "roixai/models/unet.hpp"
#include "roixai/models/vit_two_stage.hpp"

namespace roixai {

template <class T = float>
std::unique_ptr<Model<T>> build_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  switch (spec.architecture) {
    case Architecture::resnet_tiny: return std::make_unique<ResNetTiny<T>>(spec, seed);
    case Architecture::inception_tiny: return std::make_unique<InceptionTiny<T>>(spec, seed);
    case Architecture::vit_two_stage: return std::make_unique<VitTwoStage<T>>(spec, seed);
    case Architecture::unet:
    case Architecture::unet_mlp: return std::make_unique<UNet<T>>(spec, seed);
  }
  throw std::logic_error("build_model: unknown architecture");
}

/// Evaluation-mode volume probability in [0, 1].
template <class T>
double classify_volume(Model<T>& model, const Volume& volume) {
  if (!model.is_classifier()) throw std::invalid_argument("classify_volume: model is a pure autoencoder");
  if (volume.slices == 0) throw std::invalid_argument("classify_volume: empty volume");
  NoGradGuard no_grad;
  const auto out = model.forward(volume.batch<T>(), {});
  return static_cast<double>(sigmoid(out.logit).item());
}

/// Evaluation-mode reconstruction of a slice batch [s, 1, H, W] (or one [1, H, W] slice).
template <class T>
Tensor<T> reconstruct(Model<T>& model, const Tensor<T>& slices) {
  if (!model.is_reconstructor()) throw std::invalid_argument("reconstruct: model has no decoder");
  NoGradGuard no_grad;
  const auto in = slices.rank() == 3 ? reshape(slices, {1, slices.dim(0), slices.dim(1), slices.dim(2)}) : slices;
  auto out = model.forward(in, {}).reconstruction;
  return slices.rank() == 3 ? reshape(out, slices.shape()) : out;
}

/// Training objective by architecture: BCE for classifiers, MSE against the
/// input for the autoencoder, the combined loss for the hybrid.
template <class T>
Tensor<T> model_loss(const ForwardOutput<T>& out, const Tensor<T>& input, std::optional<int> label, Architecture arch,
                     const LossConfig& cfg) {
  if (arch == Architecture::unet) return mse(out.reconstruction, input);
  if (!label) throw std::invalid_argument("model_loss: classifier training needs a label");
  const auto p = sigmoid(out.logit);
  if (arch == Architecture::unet_mlp) return combined_loss(out.reconstruction, input, p, *label, cfg);
  cfg.validate();
  return binary_cross_entropy(p, *label, cfg.bce_clamp);
}

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::size_t step, double value)
      : std::runtime_error("non-finite loss " + std::to_string(value) + " at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Forward in training mode, backward, one Adam update. Returns the loss.
/// A non-finite loss or logit raises NonFiniteLossError carrying the 0-based
/// index of the failing step.
template <class T>
double train_step(Model<T>& model, const Tensor<T>& input, std::optional<int> label, Adam<T>& optimizer,
                  const LossConfig& cfg, Rng& rng) {
  ForwardContext ctx{true, &rng};
  const auto out = model.forward(input, ctx);
  if (out.logit.defined() && !std::isfinite(static_cast<double>(out.logit.item()))) {
    throw NonFiniteLossError(optimizer.steps(), static_cast<double>(out.logit.item()));
  }
  const auto loss = model_loss(out, input, label, model.spec().architecture, cfg);
  const double value = static_cast<double>(loss.item());
  if (!std::isfinite(value)) throw NonFiniteLossError(optimizer.steps(), value);
  backward(loss);
  optimizer.step(model.trainable_parameters());
  return value;
}

template <class T>
Adam<T> make_optimizer(const ModelSpec& spec) {
  return Adam<T>(spec.learning_rate, spec.reg_coeff);
}

}  // namespace roixai
