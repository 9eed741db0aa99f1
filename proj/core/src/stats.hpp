// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace biasaudit::stats {

inline double mean(std::span<const double> xs) {
  long double sum = 0;
  for (double x : xs) sum += x;
  return xs.empty() ? 0.0 : static_cast<double>(sum / xs.size());
}

/// Mean of squared deviations (divides by n).
inline double population_variance(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  const double m = mean(xs);
  long double acc = 0;
  for (double x : xs) acc += (x - m) * (x - m);
  return static_cast<double>(acc / xs.size());
}

inline double population_sd(std::span<const double> xs) { return std::sqrt(population_variance(xs)); }

/// Divides by n - 1.
inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  long double acc = 0;
  for (double x : xs) acc += (x - m) * (x - m);
  return static_cast<double>(acc / (xs.size() - 1));
}

/// Linear-interpolation quantile (Hyndman-Fan type 7) of a sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double h = (sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

inline double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return quantile_sorted(xs, 0.5);
}

/// Unscaled median absolute deviation.
inline double mad(std::span<const double> xs) {
  const double med = median({xs.begin(), xs.end()});
  std::vector<double> dev;
  dev.reserve(xs.size());
  for (double x : xs) dev.push_back(std::abs(x - med));
  return median(std::move(dev));
}

inline constexpr double kMadToSd = 1.4826;

}  // namespace biasaudit::stats
