// SPDX-License-Identifier: Apache-2.0
#include "invariance.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>

#include "biasaudit/error.hpp"
#include "biasaudit/metrics.hpp"
#include "biasaudit/synthgen.hpp"

namespace invariance {

namespace {

using biasaudit::metrics::MetricOptions;
using biasaudit::metrics::MetricResult;
using biasaudit::metrics::Scenario;
using biasaudit::tabular::Column;

struct Case {
  std::vector<Column> cols;
  MetricOptions opts;
};

// Raw values that carry the units of the outcome and are therefore expected
// to change under rescaling.
const std::set<std::string> kUnitful{"ACE", "ADE", "AIE", "total"};

Column relabel(const Column& c, std::mt19937_64& rng) {
  std::set<std::string> labels;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!c.is_missing(i)) labels.insert(c.text(i));
  }
  std::vector<std::string> from(labels.begin(), labels.end()), to;
  for (std::size_t i = 0; i < from.size(); ++i) to.push_back(fmt::format("r{}", i));
  std::shuffle(to.begin(), to.end(), rng);
  std::map<std::string, std::string> m;
  for (std::size_t i = 0; i < from.size(); ++i) m[from[i]] = to[i];
  std::vector<std::optional<std::string>> v;
  for (std::size_t i = 0; i < c.size(); ++i) {
    v.push_back(c.is_missing(i) ? std::nullopt : std::optional<std::string>(m.at(c.text(i))));
  }
  return Column::categorical(c.name(), v);
}

Column affine(const Column& c, double a, double b) {
  std::vector<std::optional<double>> v;
  for (std::size_t i = 0; i < c.size(); ++i) {
    v.push_back(c.is_missing(i) ? std::nullopt : std::optional<double>(a * c.number(i) + b));
  }
  return Column::numerical(c.name(), v);
}

struct Outcome {
  std::optional<MetricResult> result;
  std::optional<biasaudit::Errc> error;
};

Outcome run_metric(Scenario s, const Case& c, const std::string& id) {
  try {
    return {biasaudit::metrics::detect(s, c.cols, id, c.opts), std::nullopt};
  } catch (const biasaudit::Error& e) {
    return {std::nullopt, e.code()};
  }
}

}  // namespace

Stats run(std::size_t trials, std::uint64_t seed, double tol) {
  static constexpr Scenario kScenarios[] = {Scenario::CatDist, Scenario::NumDist, Scenario::CatCat, Scenario::CatNum,
                                            Scenario::NumNum};
  Stats st;
  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const Scenario sc = kScenarios[t % 5];
    biasaudit::synthgen::SynthSpec spec;
    spec.scenario = sc;
    spec.n = std::uniform_int_distribution<std::size_t>(20, 80)(rng);
    spec.k = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
    spec.strength = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    spec.seed = rng();
    const auto table = biasaudit::synthgen::generate(spec);

    Case base;
    for (const auto& name : biasaudit::synthgen::feature_columns(sc)) base.cols.push_back(table.column(name));
    if (sc == Scenario::CatNum) base.opts.mediator = table.column("mediator");
    base.opts.bins = std::uniform_int_distribution<int>(3, 8)(rng);
    base.opts.kde_grid = 16;
    ++st.trials;

    // Transforms applicable to this scenario.
    std::vector<std::pair<std::string, Case>> variants;
    {
      std::vector<std::size_t> order(table.row_count());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      Case p = base;
      for (auto& c : p.cols) c = c.take(order);
      if (p.opts.mediator) p.opts.mediator = p.opts.mediator->take(order);
      variants.emplace_back("permutation", std::move(p));
    }
    if (!base.cols.front().is_numerical()) {
      Case r = base;
      for (auto& c : r.cols) {
        if (!c.is_numerical()) c = relabel(c, rng);
      }
      variants.emplace_back("relabeling", std::move(r));
    }
    if (std::any_of(base.cols.begin(), base.cols.end(), [](const Column& c) { return c.is_numerical(); })) {
      std::uniform_real_distribution<double> scale(0.25, 8.0), shift(-50.0, 50.0);
      Case a = base;
      for (auto& c : a.cols) {
        if (c.is_numerical()) c = affine(c, scale(rng), shift(rng));
      }
      if (a.opts.mediator) a.opts.mediator = affine(*a.opts.mediator, scale(rng), shift(rng));
      variants.emplace_back("affine", std::move(a));
    }

    for (const auto& id : biasaudit::metrics::metric_ids(sc)) {
      const auto want = run_metric(sc, base, id);
      for (const auto& [name, variant] : variants) {
        ++st.checks;
        const auto got = run_metric(sc, variant, id);
        std::string problem;
        if (want.error || got.error) {
          if (want.error != got.error) problem = "error behaviour changed";
        } else {
          for (const auto& [key, w] : want.result->raw) {
            if (name == "affine" && kUnitful.count(key)) continue;
            const double g = got.result->raw.at(key);
            const double a = w, b = g;
            const bool both_inf = std::isinf(a) && std::isinf(b) && (a > 0) == (b > 0);
            if (!both_inf && !(std::abs(a - b) <= tol * std::max(1.0, std::abs(a)))) {
              problem = fmt::format("{}: {} vs {}", key, w, g);
              break;
            }
          }
        }
        if (!problem.empty()) {
          ++st.violations;
          if (st.examples.size() < 5) st.examples.push_back(fmt::format("trial {} {} {}: {}", t, name, id, problem));
        }
      }
    }
  }
  return st;
}

}  // namespace invariance
