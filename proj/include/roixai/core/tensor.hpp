#pragma once

// Dense tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a cheap handle onto a graph node. Every op that receives at
// least one gradient-requiring input records a backward closure and its
// inputs; ops over constants produce detached leaves. The graph lives as long
// as the tensors referencing it and is rebuilt on each forward pass.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <type_traits>
#include <vector>

#include "roixai/core/shape.hpp"

namespace roixai {

template <class T>
class Tensor;

namespace detail {

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  bool grad_ready = false;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
};

}  // namespace detail

/// Records the selection made by every kinked op (rectifier masks, pooling
/// argmax) during one forward pass so later passes can replay it. Finite
/// differences then difference the smooth piece the base point lies on.
struct SelectionTape {
  enum class Mode { record, replay };
  Mode mode = Mode::record;
  std::vector<std::vector<std::uint32_t>> entries;
  std::size_t cursor = 0;

  void rewind() { cursor = 0; }
};

struct AutogradState {
  bool grad_enabled = true;
  bool guided_rectifiers = false;
  SelectionTape* selection = nullptr;
};

inline AutogradState& autograd_state() {
  thread_local AutogradState state;
  return state;
}

/// Disables graph recording for the current thread within its scope.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(autograd_state().grad_enabled) { autograd_state().grad_enabled = false; }
  ~NoGradGuard() { autograd_state().grad_enabled = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// While alive, rectifier backward rules also zero negative upstream
/// gradients (guided backpropagation). The rule is read at backward time, so
/// only backward passes executed inside the scope are affected.
class GuidedGradientScope {
 public:
  GuidedGradientScope() : previous_(autograd_state().guided_rectifiers) {
    autograd_state().guided_rectifiers = true;
  }
  ~GuidedGradientScope() { autograd_state().guided_rectifiers = previous_; }
  GuidedGradientScope(const GuidedGradientScope&) = delete;
  GuidedGradientScope& operator=(const GuidedGradientScope&) = delete;

 private:
  bool previous_;
};

class SelectionScope {
 public:
  explicit SelectionScope(SelectionTape& tape) : previous_(autograd_state().selection) {
    autograd_state().selection = &tape;
  }
  ~SelectionScope() { autograd_state().selection = previous_; }
  SelectionScope(const SelectionScope&) = delete;
  SelectionScope& operator=(const SelectionScope&) = delete;

 private:
  SelectionTape* previous_;
};

/// Kinked ops call this with a lambda computing their selection. In replay
/// mode the recorded selection is returned instead.
template <class Compute>
std::vector<std::uint32_t> select_or_replay(Compute&& compute) {
  SelectionTape* tape = autograd_state().selection;
  if (tape && tape->mode == SelectionTape::Mode::replay) {
    if (tape->cursor >= tape->entries.size()) {
      throw std::logic_error("selection replay: more kinked ops than were recorded");
    }
    return tape->entries[tape->cursor++];
  }
  std::vector<std::uint32_t> selection = compute();
  if (tape) tape->entries.push_back(selection);
  return selection;
}

template <class T>
class Tensor {
 public:
  using Node = detail::Node<T>;
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (shape_numel(shape) != values.size()) {
      throw std::invalid_argument("Tensor: shape " + shape_str(shape) + " does not match " +
                                  std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
  }

  static Tensor full(Shape shape, T fill, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return from(std::move(shape), std::vector<T>(n, fill), requires_grad);
  }

  static Tensor scalar(T v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return checked().shape; }
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) throw std::out_of_range("Tensor::dim: axis out of range");
    return s[axis];
  }
  std::size_t numel() const { return checked().value.size(); }
  bool requires_grad() const { return checked().requires_grad; }
  std::string_view op_name() const { return checked().op; }

  std::span<const T> values() const { return checked().value; }
  /// Direct write access; intended for leaves (parameter init, optimizer updates).
  std::span<T> mutable_values() { return checked().value; }
  const std::vector<T>& vec() const { return checked().value; }

  /// Gradient after the most recent backward pass; empty if none was computed.
  std::span<const T> grad() const { return checked().grad; }
  std::span<T> mutable_grad() { return checked().grad; }
  bool has_grad() const { return checked().grad_ready && !checked().grad.empty(); }

  void zero_grad() {
    auto& n = checked();
    n.grad.clear();
    n.grad_ready = false;
  }

  T item() const {
    if (numel() != 1) throw std::logic_error("Tensor::item: tensor has " + std::to_string(numel()) + " values");
    return checked().value[0];
  }

  T operator[](std::size_t i) const { return checked().value[i]; }

  /// Copy of the values as a new leaf.
  Tensor detach(bool requires_grad = false) const { return from(shape(), vec(), requires_grad); }

  /// Same storage semantics as detach but in a new shape.
  Tensor reshaped_leaf(Shape shape) const { return from(std::move(shape), vec(), false); }

  void set_requires_grad(bool flag) { checked().requires_grad = flag; }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  Node& checked() const {
    if (!node_) throw std::logic_error("Tensor: use of undefined tensor");
    return *node_;
  }

  std::shared_ptr<Node> node_;
};

namespace detail {

/// Builds an op result. `backward` receives the result node (with its grad
/// populated) and must accumulate into the grads of `inputs` that require it.
template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> values, std::vector<Tensor<T>> inputs, std::string_view op,
                      std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = op;
  if (node->value.size() != shape_numel(node->shape)) {
    throw std::logic_error(std::string("op ") + std::string(op) + ": result size mismatch");
  }
  bool needs = false;
  if (autograd_state().grad_enabled) {
    for (const auto& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.node());
    node->backward_fn = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

template <class T>
bool wants_grad(const std::shared_ptr<Node<T>>& n) {
  return n->requires_grad && !n->grad.empty();
}

}  // namespace detail

/// Reverse-mode sweep from a scalar. Every gradient-requiring node upstream
/// of `loss` has its gradient zeroed first, then accumulated.
template <class T>
void backward(const Tensor<T>& loss) {
  using Node = detail::Node<T>;
  if (!loss.defined()) throw std::logic_error("backward: undefined loss tensor");
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw std::logic_error("backward: loss is detached from every gradient-requiring tensor");
  }

  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    n->grad.assign(n->value.size(), T(0));
    n->grad_ready = false;
  }
  order.back()->grad[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
    n->grad_ready = true;
  }
}

}  // namespace roixai
