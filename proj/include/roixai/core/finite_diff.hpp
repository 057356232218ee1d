#pragma once

// Central finite-difference verification of analytic gradients.
//
// The base evaluation records every kinked op's selection (rectifier masks,
// pooling argmax); perturbed evaluations replay it, so the difference is taken
// on the smooth piece containing the base point even when a perturbation of
// size epsilon would cross a kink.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "roixai/core/tensor.hpp"

namespace roixai {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t coordinates = 0;
};

namespace detail {

// Coordinates far below the gradient's peak magnitude sit near a zero of the
// derivative, where the O(epsilon^2) truncation term dominates any ratio. Their
// error is measured against kRelativeFloor times the peak instead.
inline constexpr double kRelativeFloor = 1e-2;

inline double relative_error(double analytic, double numeric, double peak) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeFloor * peak, 1e-8});
  return std::abs(analytic - numeric) / denom;
}

template <class T>
double checked_scalar(const Tensor<T>& y) {
  if (y.numel() != 1) throw std::invalid_argument("finite_diff_check: function must return a scalar");
  const double v = static_cast<double>(y.item());
  if (!std::isfinite(v)) throw std::domain_error("finite_diff_check: function value is not finite");
  return v;
}

// Shared driver: `evaluate` runs the function at the current state, `perturb`
// sets coordinate i to base + delta (delta 0 restores it).
template <class T, class Evaluate, class Perturb>
GradCheckResult run_grad_check(std::size_t coordinates, const std::vector<T>& analytic, Evaluate&& evaluate,
                               Perturb&& perturb, double epsilon, SelectionTape& tape) {
  GradCheckResult result;
  result.coordinates = coordinates;
  tape.mode = SelectionTape::Mode::replay;
  NoGradGuard no_grad;
  std::vector<double> numeric(coordinates);
  for (std::size_t i = 0; i < coordinates; ++i) {
    perturb(i, static_cast<T>(epsilon));
    tape.rewind();
    const double up = evaluate();
    perturb(i, static_cast<T>(-epsilon));
    tape.rewind();
    const double down = evaluate();
    perturb(i, T(0));
    numeric[i] = (up - down) / (2.0 * epsilon);
  }
  double peak = 0.0;
  for (std::size_t i = 0; i < coordinates; ++i) {
    peak = std::max({peak, std::abs(static_cast<double>(analytic[i])), std::abs(numeric[i])});
  }
  for (std::size_t i = 0; i < coordinates; ++i) {
    const double a = static_cast<double>(analytic[i]);
    const double err = relative_error(a, numeric[i], peak);
    if (i == 0 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
      result.analytic_at_worst = a;
      result.numeric_at_worst = numeric[i];
    }
  }
  return result;
}

}  // namespace detail

/// Max over coordinates of |a - c| / max(|a|, |c|, 0.01·peak, 1e-8), where a is
/// the analytic and c the central-difference gradient of `function` at `point`
/// and peak is the largest gradient magnitude.
template <class T, class F>
GradCheckResult finite_diff_check(F&& function, const Tensor<T>& point, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite_diff_check: epsilon must be positive");
  SelectionTape tape;
  SelectionScope scope(tape);
  Tensor<T> x = point.detach(true);
  const Tensor<T> y = function(x);
  detail::checked_scalar(y);
  backward(y);
  std::vector<T> analytic(x.grad().begin(), x.grad().end());
  if (analytic.empty()) analytic.assign(x.numel(), T(0));

  std::vector<T> base(point.values().begin(), point.values().end());
  Tensor<T> probe = point.detach(false);
  auto values = probe.mutable_values();
  return detail::run_grad_check<T>(
      x.numel(), analytic, [&] { return detail::checked_scalar(function(probe)); },
      [&](std::size_t i, T delta) { values[i] = base[i] + delta; }, epsilon, tape);
}

/// Same check with respect to a parameter leaf that `function` closes over.
/// The parameter is perturbed in place and restored.
template <class T, class F>
GradCheckResult finite_diff_check_param(F&& function, Tensor<T> parameter, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite_diff_check: epsilon must be positive");
  if (!parameter.requires_grad()) throw std::invalid_argument("finite_diff_check_param: parameter does not require grad");
  SelectionTape tape;
  SelectionScope scope(tape);
  const Tensor<T> y = function();
  detail::checked_scalar(y);
  backward(y);
  std::vector<T> analytic(parameter.grad().begin(), parameter.grad().end());
  if (analytic.empty()) analytic.assign(parameter.numel(), T(0));
  std::vector<T> base(parameter.values().begin(), parameter.values().end());
  auto values = parameter.mutable_values();
  return detail::run_grad_check<T>(
      parameter.numel(), analytic, [&] { return detail::checked_scalar(function()); },
      [&](std::size_t i, T delta) { values[i] = base[i] + delta; }, epsilon, tape);
}

}  // namespace roixai
