// SPDX-License-Identifier: Apache-2.0
#pragma once

// Seeded generators of synthetic tables with a single bias-strength knob per
// scenario. Used to calibrate severity thresholds and as test fixtures.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "biasaudit/metrics.hpp"
#include "biasaudit/tabular.hpp"

namespace biasaudit::synthgen {

/// SplitMix64 (Steele, Lea, Flood 2014). Every stream is fully determined by
/// its seed; split() derives an independent child stream.
class SplitMix64 {
 public:
  static constexpr std::string_view kName = "splitmix64";

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on {0, ..., bound - 1}; bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;
  /// Standard normal via Box-Muller.
  double normal() noexcept;
  SplitMix64 split() noexcept { return SplitMix64(next()); }

  template <class T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0;
  bool has_spare_ = false;
};

struct SynthSpec {
  metrics::Scenario scenario = metrics::Scenario::CatDist;
  std::size_t n = 1000;
  /// Categories for categorical columns; ignored by NumDist and NumNum.
  std::size_t k = 2;
  /// 0 is balanced or independent, 1 is maximal bias.
  double strength = 0;
  std::uint64_t seed = 0;

  /// Throws InvalidSpec unless n >= 10, k >= 2 and strength in [0, 1].
  void validate() const;
};

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

/// Column names per scenario:
///   CatDist "category"; NumDist "value"; CatCat "group", "outcome";
///   CatNum "group", "outcome", "mediator"; NumNum "x", "y".
/// Table metadata records the generator algorithm, seed, and spec.
tabular::Table generate(const SynthSpec& spec);

/// Names of the analyzed columns in generate()'s output, in detection order.
std::vector<std::string> feature_columns(metrics::Scenario s);

struct SuiteCase {
  SynthSpec spec;
  int level = 1;
};

/// Strength used for an intended level 1..5: 0.05, 0.2, 0.45, 0.7, 0.95.
double strength_for_level(int level);

/// Three replicates per level at (n, k) = (500, 2), (5000, 3), (20000, 4);
/// case i gets seed base_seed + i. Throws InvalidSpec for a level outside 1..5.
std::vector<SuiteCase> grade_suite(metrics::Scenario scenario, std::span<const int> levels,
                                   std::uint64_t base_seed = 1);

}  // namespace biasaudit::synthgen
