// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <limits>
#include <random>

#include "biasaudit/error.hpp"
#include "biasaudit/severity.hpp"

namespace {

using namespace biasaudit;
using namespace biasaudit::severity;

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::InvalidArgument;
}

metrics::MetricResult result(const char* id, const char* key, double v) {
  metrics::MetricResult r;
  r.metric_id = id;
  r.scenario = metrics::scenario_of(id);
  r.raw[key] = v;
  return r;
}

int level(const char* id, const char* key, double v) {
  return map_to_level(id, result(id, key, v), ThresholdTable::defaults()).value;
}

TEST(Levels, FixedLabels) {
  EXPECT_EQ(level_label(1), "most balanced");
  EXPECT_EQ(level_label(3), "moderately biased");
  EXPECT_EQ(BiasLevel{5}.label(), "most biased");
  EXPECT_EQ(code_of([] { level_label(0); }), Errc::InvalidArgument);
  EXPECT_LT(BiasLevel{2}, BiasLevel{4});
}

TEST(Mapping, DefaultAnchors) {
  EXPECT_EQ(level("shannon_balance", "balance", 1.0), 1);
  EXPECT_EQ(level("shannon_balance", "balance", 0.0), 5);
  EXPECT_EQ(level("max_min_ratio", "ratio", 100.0), 4);
  EXPECT_EQ(level("max_min_ratio", "ratio", 101.0), 5);
  EXPECT_EQ(level("max_min_ratio", "ratio", 50.0), 4);
  EXPECT_EQ(level("max_min_ratio", "ratio", 10.0), 3);
  EXPECT_EQ(level("max_min_ratio", "ratio", std::numeric_limits<double>::infinity()), 5);
  EXPECT_EQ(level("pearson", "r", -0.8), 5);  // deviation from 0 in either direction
}

TEST(Mapping, TieGoesToLowerLevel) {
  const auto& e = ThresholdTable::defaults().entry("cramers_v");
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(e.level_of(e.cuts[i]), static_cast<int>(i) + 1);
    EXPECT_EQ(e.level_of(std::nextafter(e.cuts[i], 10.0)), static_cast<int>(i) + 2);
  }
}

TEST(Mapping, LevelIsMonotoneInTransformedValue) {
  std::mt19937_64 rng(1);
  for (const auto& e : ThresholdTable::defaults().entries()) {
    std::vector<double> v(200);
    for (auto& x : v) x = std::uniform_real_distribution<double>(-1, 200)(rng);
    std::sort(v.begin(), v.end());
    for (std::size_t i = 1; i < v.size(); ++i) EXPECT_LE(e.level_of(v[i - 1]), e.level_of(v[i])) << e.metric_id;
  }
}

TEST(Table, DefaultsCoverEveryMetric) {
  const auto& t = ThresholdTable::defaults();
  EXPECT_EQ(t.entries().size(), 25u);
  EXPECT_EQ(code_of([&] { t.entry("nope"); }), Errc::UnknownMetric);
  auto e = t.entry("gini");
  e.cuts = {0.1, 0.1, 0.2, 0.3};
  EXPECT_EQ(code_of([&] { t.with_entry(e); }), Errc::InvalidArgument);
  auto missing = t.entries();
  missing.pop_back();
  EXPECT_EQ(code_of([&] { ThresholdTable("x", missing); }), Errc::InvalidArgument);
}

TEST(Table, JsonRoundTrip) {
  const auto& t = ThresholdTable::defaults();
  const auto path = std::filesystem::temp_directory_path() / "biasaudit_thresholds_test.json";
  save_table(t, path);
  EXPECT_EQ(load_table(path), t);
  std::filesystem::remove(path);
  EXPECT_EQ(code_of([] { load_table("/nonexistent/t.json"); }), Errc::FileNotFound);
  EXPECT_EQ(code_of([] { nlohmann::json{{"version", "v"}}.get<ThresholdTable>(); }), Errc::InvalidArgument);
}

TEST(CalibrateEntry, PerfectlyClassifiedIsUnchanged) {
  const auto& e = ThresholdTable::defaults().entry("cramers_v");
  const std::vector<Observation> obs{{0.05, 1}, {0.2, 2}, {0.3, 3}, {0.5, 4}, {0.9, 5}};
  EXPECT_EQ(calibrate_entry(e, obs), e);
}

TEST(CalibrateEntry, SeparableObservationsBecomeExact) {
  const auto& e = ThresholdTable::defaults().entry("cramers_v");
  std::vector<Observation> obs;
  for (int l = 1; l <= 5; ++l) {
    for (int r = 0; r < 3; ++r) obs.push_back({0.01 * l + 0.001 * r, l});
  }
  EXPECT_LT(accuracy(e, obs), 1.0);
  const auto after = calibrate_entry(e, obs);
  EXPECT_DOUBLE_EQ(accuracy(after, obs), 1.0);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_LT(after.cuts[i - 1], after.cuts[i]);
}

TEST(CalibrateEntry, NeverLowersAccuracy) {
  std::mt19937_64 rng(17);
  const auto& e = ThresholdTable::defaults().entry("hsic");
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Observation> obs;
    for (int i = 0; i < 25; ++i) {
      const int l = 1 + static_cast<int>(rng() % 5);
      obs.push_back({0.1 * l + std::normal_distribution<double>(0, 0.08)(rng), l});
    }
    EXPECT_GE(accuracy(calibrate_entry(e, obs), obs), accuracy(e, obs));
  }
}

TEST(Calibrate, SingleLevelSuiteIsRejected) {
  const std::vector<int> levels{3};
  const auto suite = synthgen::grade_suite(metrics::Scenario::CatDist, levels);
  EXPECT_EQ(code_of([&] { calibrate(suite, ThresholdTable::defaults()); }), Errc::PreconditionFailed);
}

TEST(Calibrate, BalanceSuiteReachesNinetyPercent) {
  const std::vector<int> levels{1, 2, 3, 4, 5};
  const auto suite = synthgen::grade_suite(metrics::Scenario::CatDist, levels, 3);
  const auto report = calibrate(suite, ThresholdTable::defaults());
  const auto it = std::find_if(report.metrics.begin(), report.metrics.end(),
                               [](const auto& m) { return m.metric_id == "shannon_balance"; });
  ASSERT_NE(it, report.metrics.end());
  EXPECT_GE(it->accuracy_after, 0.9);
  EXPECT_GE(it->accuracy_after, it->accuracy_before);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_LT(it->cuts_after[i - 1], it->cuts_after[i]);

  // Calibrating a table against the suite it was calibrated on changes nothing.
  const auto again = calibrate(suite, report.table);
  EXPECT_EQ(again.table, report.table);
}

}  // namespace
