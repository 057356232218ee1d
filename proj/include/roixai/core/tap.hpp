#pragma once

#include <algorithm>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "roixai/core/tensor.hpp"

namespace roixai {

/// Activations of a named layer and the gradient of the backward target with
/// respect to them, both (slices, C, H', W').
template <class T>
struct TapRecord {
  std::string layer_name;
  Tensor<T> activations;
  Tensor<T> upstream_grad;
};

namespace detail {
template <class T>
struct TapSlot {
  std::string name;
  Tensor<T> captured;
};
}  // namespace detail

template <class T>
class TapHandle {
 public:
  TapHandle() = default;
  explicit TapHandle(std::shared_ptr<detail::TapSlot<T>> slot) : slot_(std::move(slot)) {}

  const std::string& layer_name() const { return slot_->name; }
  bool captured() const { return slot_ && slot_->captured.defined(); }
  bool populated() const { return captured() && slot_->captured.has_grad(); }

  /// Copies the captured activations and gradient. Throws if no forward pass
  /// was captured or no backward pass reached the layer yet.
  /// The captured activations as a live graph node, for building targets.
  const Tensor<T>& activations() const {
    if (!slot_) throw std::logic_error("tap: empty handle");
    if (!captured()) throw std::logic_error("tap '" + layer_name() + "': no forward pass has been captured");
    return slot_->captured;
  }

  TapRecord<T> record() const {
    if (!slot_) throw std::logic_error("tap: empty handle");
    if (!captured()) throw std::logic_error("tap '" + slot_->name + "': no forward pass has been captured");
    if (!populated()) throw std::logic_error("tap '" + slot_->name + "': not populated, run backward first");
    const auto& t = slot_->captured;
    return {slot_->name, t.detach(), Tensor<T>::from(t.shape(), std::vector<T>(t.grad().begin(), t.grad().end()))};
  }

 private:
  std::shared_ptr<detail::TapSlot<T>> slot_;
};

/// Named capture points of a model. Models declare their layer names once and
/// call capture() during forward; registered taps keep the latest capture.
template <class T>
class TapRegistry {
 public:
  void declare(std::string name) {
    if (std::find(names_.begin(), names_.end(), name) == names_.end()) names_.push_back(std::move(name));
  }

  const std::vector<std::string>& layer_names() const { return names_; }

  TapHandle<T> attach(const std::string& name) {
    if (std::find(names_.begin(), names_.end(), name) == names_.end()) {
      std::string available;
      for (const auto& n : names_) available += (available.empty() ? "" : ", ") + n;
      throw std::invalid_argument("unknown layer '" + name + "'; available: " + available);
    }
    auto slot = std::make_shared<detail::TapSlot<T>>();
    slot->name = name;
    prune();
    slots_.push_back(slot);
    return TapHandle<T>(slot);
  }

  void capture(const std::string& name, const Tensor<T>& t) {
    for (auto& w : slots_)
      if (auto s = w.lock(); s && s->name == name) s->captured = t;
  }

  void detach_all() { slots_.clear(); }

 private:
  std::vector<std::string> names_;
  void prune() {
    std::erase_if(slots_, [](const auto& w) { return w.expired(); });
  }

  // Handles own their slots; a dropped handle stops capturing.
  std::vector<std::weak_ptr<detail::TapSlot<T>>> slots_;
};

}  // namespace roixai
