#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace bstack {

/// Type-7 (linear interpolation) sample quantile of already sorted data.
template <typename Scalar>
Scalar quantile_sorted(std::span<const Scalar> sorted, double prob) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("quantile probability outside [0,1]");
  const double h = static_cast<double>(sorted.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const Scalar frac = static_cast<Scalar>(h - static_cast<double>(lo));
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

template <typename Scalar>
Scalar quantile(std::span<const Scalar> values, double prob) {
  std::vector<Scalar> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted<Scalar>(sorted, prob);
}

/// Median plus the 5% and 95% quantiles of a posterior sample.
struct Summary {
  double median = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
};

inline Summary summarize(std::span<const double> draws) {
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  const std::span<const double> s(sorted);
  return {quantile_sorted(s, 0.5), quantile_sorted(s, 0.05), quantile_sorted(s, 0.95)};
}

}  // namespace bstack
