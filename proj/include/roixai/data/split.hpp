#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "roixai/core/random.hpp"

namespace roixai {

/// Patient indices, each list sorted ascending.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

namespace detail {
inline bool has_positive(const std::vector<std::size_t>& ids, std::span<const int> labels) {
  return std::any_of(ids.begin(), ids.end(), [&](std::size_t i) { return labels[i] == 1; });
}
}  // namespace detail

inline constexpr std::size_t kMaxSplitAttempts = 1000;

/// Patient-level shuffle split. With labels, reshuffles under derived seeds
/// until both sides hold a positive case.
inline Split make_split(std::size_t n_patients, double train_fraction, std::uint64_t seed,
                        std::span<const int> labels = {}) {
  if (n_patients < 2) throw std::invalid_argument("make_split: need at least 2 patients");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("make_split: train_fraction must lie in (0, 1)");
  }
  if (!labels.empty() && labels.size() != n_patients) throw std::invalid_argument("make_split: label count mismatch");
  if (!labels.empty() && std::count(labels.begin(), labels.end(), 1) < 2) {
    throw std::invalid_argument("make_split: need at least 2 positive patients to place one in each split");
  }
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n_patients))), 1, n_patients - 1);

  for (std::size_t attempt = 0; attempt < kMaxSplitAttempts; ++attempt) {
    std::vector<std::size_t> order(n_patients);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(attempt == 0 ? seed : derive_seed(seed, attempt));
    rng.shuffle(order.begin(), order.end());
    Split s{{order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train)},
            {order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end()}};
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.validation.begin(), s.validation.end());
    if (labels.empty() || (detail::has_positive(s.train, labels) && detail::has_positive(s.validation, labels))) return s;
  }
  throw std::runtime_error("make_split: no split with positives on both sides after " +
                           std::to_string(kMaxSplitAttempts) + " attempts");
}

}  // namespace roixai
