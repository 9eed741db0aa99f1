// SPDX-License-Identifier: Apache-2.0
#include "biasaudit/synthgen.hpp"

#include <fmt/format.h>

#include <array>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <numeric>

#include "biasaudit/error.hpp"

namespace biasaudit::synthgen {

using metrics::Scenario;

std::uint64_t SplitMix64::next() noexcept {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::uint64_t SplitMix64::below(std::uint64_t bound) noexcept {
  // Rejection keeps the modulo unbiased.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next();
    if (r >= threshold) return r % bound;
  }
}

double SplitMix64::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

void SynthSpec::validate() const {
  if (n < 10) throw Error(Errc::InvalidSpec, fmt::format("n must be >= 10, got {}", n));
  if (k < 2) throw Error(Errc::InvalidSpec, fmt::format("k must be >= 2, got {}", k));
  if (!(strength >= 0 && strength <= 1)) {
    throw Error(Errc::InvalidSpec, fmt::format("strength must be in [0, 1], got {}", strength));
  }
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = nlohmann::json{{"scenario", std::string(metrics::to_string(s.scenario))},
                     {"n", s.n},
                     {"k", s.k},
                     {"strength", s.strength},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
  const auto tag = j.at("scenario").get<std::string>();
  const auto scenario = metrics::scenario_from_string(tag);
  if (!scenario) throw Error(Errc::InvalidSpec, fmt::format("unknown scenario '{}'", tag));
  s.scenario = *scenario;
  s.n = j.at("n").get<std::size_t>();
  s.k = j.value("k", std::size_t{2});
  s.strength = j.at("strength").get<double>();
  s.seed = j.value("seed", std::uint64_t{0});
  s.validate();
}

namespace {

constexpr double kGeometricRatio = 0.1;
constexpr double kTailSigma = 0.75;

std::string label(char prefix, std::size_t i) { return fmt::format("{}{}", prefix, i); }

// Counts proportional to weights summing exactly to n (largest remainder,
// ties to the lower index).
std::vector<std::size_t> allocate(const std::vector<double>& w, std::size_t n) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<std::size_t> counts(w.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t used = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double exact = static_cast<double>(n) * w[i] / total;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    used += counts[i];
    rema.emplace_back(exact - static_cast<double>(counts[i]), i);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; used < n; ++r, ++used) ++counts[rema[r % rema.size()].second];
  return counts;
}

// Stratified sample of the standard normal: one draw from the middle half of
// each stratum [i/n, (i+1)/n) of the probability scale, in random order.
// Keeping away from the stratum edges bounds the extreme tail draws, which
// otherwise dominate sample kurtosis.
std::vector<double> stratified_normal(std::size_t n, SplitMix64& rng) {
  const boost::math::normal_distribution<double> unit;
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + 0.25 + 0.5 * rng.uniform()) / static_cast<double>(n);
    z[i] = boost::math::quantile(unit, u);
  }
  rng.shuffle(z);
  return z;
}

// Exactly balanced category indices in random order.
std::vector<std::size_t> balanced_indices(std::size_t n, std::size_t k, SplitMix64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i % k;
  rng.shuffle(idx);
  return idx;
}

std::vector<std::optional<std::string>> labels_of(const std::vector<std::size_t>& idx, char prefix) {
  std::vector<std::optional<std::string>> out;
  out.reserve(idx.size());
  for (auto i : idx) out.emplace_back(label(prefix, i));
  return out;
}

std::vector<std::optional<double>> optional_of(const std::vector<double>& v) { return {v.begin(), v.end()}; }

std::vector<tabular::Column> build(const SynthSpec& spec, SplitMix64& rng) {
  const double s = spec.strength;
  const std::size_t n = spec.n, k = spec.k;
  switch (spec.scenario) {
    case Scenario::CatDist: {
      std::vector<double> w(k);
      for (std::size_t i = 0; i < k; ++i) w[i] = 1.0 - s * (1.0 - std::pow(kGeometricRatio, static_cast<double>(i)));
      const auto counts = allocate(w, n);
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < k; ++i) idx.insert(idx.end(), counts[i], i);
      rng.shuffle(idx);
      return {tabular::Column::categorical("category", labels_of(idx, 'c'))};
    }
    case Scenario::NumDist: {
      // Comonotone blend of a standard normal with a centered, scaled
      // lognormal driven by the same latent draw, so skew and tail weight
      // grow monotonically with the strength.
      const double sig2 = kTailSigma * kTailSigma;
      const double sd_l = std::sqrt((std::exp(sig2) - 1) * std::exp(sig2));
      const auto z = stratified_normal(n, rng);
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double tail = (std::exp(kTailSigma * z[i]) - std::exp(sig2 / 2)) / sd_l;
        x[i] = (1 - s) * z[i] + s * tail;
      }
      return {tabular::Column::numerical("value", optional_of(x))};
    }
    case Scenario::CatCat: {
      const auto a = balanced_indices(n, k, rng);
      std::vector<std::size_t> b(n);
      for (std::size_t i = 0; i < n; ++i) b[i] = rng.uniform() < s ? a[i] : rng.below(k);
      return {tabular::Column::categorical("group", labels_of(a, 'g')),
              tabular::Column::categorical("outcome", labels_of(b, 'o'))};
    }
    case Scenario::CatNum: {
      const auto g = balanced_indices(n, k, rng);
      std::vector<double> y(n), m(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = g[i] == 0 ? 1.0 : 0.0;
        y[i] = rng.normal() + 2 * s * t;
        m[i] = s * t + rng.normal();
      }
      return {tabular::Column::categorical("group", labels_of(g, 'g')),
              tabular::Column::numerical("outcome", optional_of(y)),
              tabular::Column::numerical("mediator", optional_of(m))};
    }
    case Scenario::NumNum: {
      std::vector<double> x(n), y(n);
      const double rest = std::sqrt(1 - s * s);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.normal();
        y[i] = s * x[i] + rest * rng.normal();
      }
      return {tabular::Column::numerical("x", optional_of(x)), tabular::Column::numerical("y", optional_of(y))};
    }
  }
  throw Error(Errc::InvalidSpec, "unhandled scenario");
}

}  // namespace

tabular::Table generate(const SynthSpec& spec) {
  spec.validate();
  SplitMix64 rng(spec.seed);
  tabular::Table t(fmt::format("synth_{}_s{}", metrics::to_string(spec.scenario), spec.seed), build(spec, rng));
  return t.with_metadata("rng", std::string(SplitMix64::kName))
      .with_metadata("seed", std::to_string(spec.seed))
      .with_metadata("spec", nlohmann::json(spec).dump());
}

std::vector<std::string> feature_columns(Scenario s) {
  switch (s) {
    case Scenario::CatDist: return {"category"};
    case Scenario::NumDist: return {"value"};
    case Scenario::CatCat: return {"group", "outcome"};
    case Scenario::CatNum: return {"group", "outcome"};
    case Scenario::NumNum: return {"x", "y"};
  }
  return {};
}

double strength_for_level(int level) {
  static constexpr std::array<double, 5> kStrengths{0.05, 0.2, 0.45, 0.7, 0.95};
  if (level < 1 || level > 5) throw Error(Errc::InvalidSpec, fmt::format("level must be in 1..5, got {}", level));
  return kStrengths[static_cast<std::size_t>(level - 1)];
}

std::vector<SuiteCase> grade_suite(Scenario scenario, std::span<const int> levels, std::uint64_t base_seed) {
  static constexpr std::array<std::pair<std::size_t, std::size_t>, 3> kReplicates{{{500, 2}, {5000, 3}, {20000, 4}}};
  std::vector<SuiteCase> suite;
  for (int level : levels) {
    const double s = strength_for_level(level);
    for (const auto& [n, k] : kReplicates) {
      SuiteCase c;
      c.spec = SynthSpec{scenario, n, k, s, base_seed + suite.size()};
      c.level = level;
      suite.push_back(c);
    }
  }
  return suite;
}

}  // namespace biasaudit::synthgen
