// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "biasaudit/error.hpp"
#include "biasaudit/synthgen.hpp"

namespace {

using namespace biasaudit;
using namespace biasaudit::synthgen;
using metrics::Scenario;

double metric(const SynthSpec& spec, const char* id, const char* key) {
  const auto t = generate(spec);
  std::vector<tabular::Column> cols;
  for (const auto& name : feature_columns(spec.scenario)) cols.push_back(t.column(name));
  metrics::MetricOptions o;
  if (t.has_column("mediator")) o.mediator = t.column("mediator");
  return metrics::detect(spec.scenario, cols, id, o).at(key);
}

TEST(SplitMix, DeterministicStream) {
  SplitMix64 a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    EXPECT_NE(x, c.next());
  }
  SplitMix64 u(7);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
    EXPECT_LT(u.below(13), 13u);
  }
}

TEST(Generate, SameSeedSameTable) {
  for (int s = 0; s < 5; ++s) {
    const SynthSpec spec{static_cast<Scenario>(s), 200, 3, 0.4, 9};
    EXPECT_EQ(generate(spec), generate(spec));
    auto other = spec;
    other.seed = 10;
    EXPECT_NE(generate(spec), generate(other));
  }
}

TEST(Generate, ShapeFollowsSpec) {
  const auto t = generate({Scenario::CatCat, 321, 4, 0.5, 1});
  EXPECT_EQ(t.row_count(), 321u);
  EXPECT_FALSE(t.column("group").is_numerical());
  EXPECT_LE(t.column("group").categories().size(), 4u);
  const auto n = generate({Scenario::NumNum, 50, 2, 0.5, 1});
  EXPECT_TRUE(n.column("x").is_numerical());
  EXPECT_TRUE(n.column("y").is_numerical());
  EXPECT_TRUE(generate({Scenario::CatNum, 50, 2, 0.5, 1}).has_column("mediator"));
}

TEST(Generate, NullStrengthSitsAtTheMetricNulls) {
  EXPECT_NEAR(metric({Scenario::CatDist, 20000, 4, 0.0, 1}, "shannon_balance", "balance"), 1.0, 0.01);
  EXPECT_NEAR(metric({Scenario::CatCat, 20000, 2, 0.0, 1}, "cramers_v", "V"), 0.0, 0.03);
  EXPECT_NEAR(metric({Scenario::NumNum, 20000, 2, 0.0, 1}, "pearson", "r"), 0.0, 0.03);
  EXPECT_NEAR(metric({Scenario::CatNum, 20000, 2, 0.0, 1}, "causal_effect", "ACE_std"), 0.0, 0.05);
}

TEST(Generate, StrengthAnchors) {
  EXPECT_NEAR(metric({Scenario::NumNum, 10000, 2, 0.9, 2024}, "pearson", "r"), 0.9, 0.02);
  EXPECT_NEAR(metric({Scenario::CatNum, 10000, 2, 0.25, 2024}, "cohens_d", "d_max"), 0.5, 0.05);
}

TEST(Generate, StrengthIsMonotoneInItsHeadlineMetric) {
  const std::vector<std::pair<Scenario, std::pair<const char*, const char*>>> probes{
      {Scenario::CatDist, {"relative_risk", "rr_dev_max"}},
      {Scenario::CatCat, {"cramers_v", "V"}},
      {Scenario::CatNum, {"cohens_d", "d_max"}},
      {Scenario::NumNum, {"pearson", "r"}}};
  for (const auto& [s, m] : probes) {
    double prev = -1;
    for (double strength : {0.05, 0.2, 0.45, 0.7, 0.95}) {
      const double v = std::abs(metric({s, 20000, 3, strength, 5}, m.first, m.second));
      EXPECT_GT(v, prev) << metrics::to_string(s) << " strength " << strength;
      prev = v;
    }
  }
}

TEST(Validate, RejectsBadSpecs) {
  for (const SynthSpec bad : {SynthSpec{Scenario::CatDist, 5, 2, 0.5, 0}, SynthSpec{Scenario::CatDist, 100, 1, 0.5, 0},
                              SynthSpec{Scenario::CatDist, 100, 2, 1.5, 0}, SynthSpec{Scenario::CatDist, 100, 2, -0.1, 0},
                              SynthSpec{Scenario::CatDist, 100, 2, NAN, 0}}) {
    try {
      generate(bad);
      ADD_FAILURE() << "accepted n=" << bad.n << " k=" << bad.k << " s=" << bad.strength;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::InvalidSpec);
    }
  }
}

TEST(Spec, JsonRoundTrip) {
  const SynthSpec s{Scenario::NumDist, 777, 3, 0.25, 99};
  nlohmann::json j = s;
  const auto back = j.get<SynthSpec>();
  EXPECT_EQ(back.scenario, s.scenario);
  EXPECT_EQ(back.n, s.n);
  EXPECT_EQ(back.k, s.k);
  EXPECT_EQ(back.strength, s.strength);
  EXPECT_EQ(back.seed, s.seed);
  EXPECT_THROW((nlohmann::json{{"scenario", "bogus"}, {"n", 10}}.get<SynthSpec>()), Error);
}

TEST(Suite, FifteenCasesPerScenarioWithDistinctSeeds) {
  const std::vector<int> all{1, 2, 3, 4, 5};
  const auto suite = grade_suite(Scenario::NumDist, all);
  EXPECT_EQ(suite.size(), 15u);
  std::set<std::uint64_t> seeds;
  for (const auto& c : suite) {
    seeds.insert(c.spec.seed);
    EXPECT_DOUBLE_EQ(c.spec.strength, strength_for_level(c.level));
  }
  EXPECT_EQ(seeds.size(), 15u);
  EXPECT_TRUE(grade_suite(Scenario::NumDist, std::vector<int>{}).empty());
  EXPECT_THROW(strength_for_level(6), Error);
}

}  // namespace
