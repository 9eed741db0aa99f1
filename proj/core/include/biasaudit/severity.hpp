// SPDX-License-Identifier: Apache-2.0
#pragma once

// Five-level severity scale and the per-metric threshold table that maps raw
// metric values onto it.

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biasaudit/metrics.hpp"
#include "biasaudit/synthgen.hpp"

namespace biasaudit::severity {

struct BiasLevel {
  int value = 1;

  /// "most balanced", "balanced", "moderately biased", "biased", "most biased".
  std::string_view label() const;
  friend auto operator<=>(const BiasLevel&, const BiasLevel&) = default;
};

/// Throws InvalidArgument outside 1..5.
std::string_view level_label(int level);

enum class Direction { HigherIsMoreBiased, DeviationFromTarget };

struct ThresholdEntry {
  std::string metric_id;
  /// Key in MetricResult::raw holding the scalar that is mapped.
  std::string raw_key;
  Direction direction = Direction::HigherIsMoreBiased;
  /// Only meaningful for DeviationFromTarget; the mapped value is |raw - target|.
  double target = 0;
  std::array<double, 4> cuts{};

  double transform(double raw) const;
  double transform(const metrics::MetricResult& r) const { return transform(r.at(raw_key)); }
  /// 1 + number of cuts strictly below `transformed`; +inf maps to 5.
  int level_of(double transformed) const;

  friend bool operator==(const ThresholdEntry&, const ThresholdEntry&) = default;
};

class ThresholdTable {
 public:
  ThresholdTable() = default;
  /// Throws InvalidArgument for non-increasing cuts, duplicate or unknown ids,
  /// and InvalidArgument when a metric id is missing.
  ThresholdTable(std::string version, std::vector<ThresholdEntry> entries);

  /// The shipped table, version "default-v1".
  static const ThresholdTable& defaults();

  const std::string& version() const noexcept { return version_; }
  /// Throws UnknownMetric.
  const ThresholdEntry& entry(std::string_view metric_id) const;
  /// Entries in canonical metric order.
  std::vector<ThresholdEntry> entries() const;
  ThresholdTable with_entry(ThresholdEntry e) const;
  ThresholdTable with_version(std::string version) const;

  friend bool operator==(const ThresholdTable&, const ThresholdTable&) = default;

 private:
  std::string version_;
  std::map<std::string, ThresholdEntry, std::less<>> entries_;
};

void to_json(nlohmann::json& j, const ThresholdTable& t);
void from_json(const nlohmann::json& j, ThresholdTable& t);
ThresholdTable load_table(const std::filesystem::path& path);
void save_table(const ThresholdTable& t, const std::filesystem::path& path);

/// Errors: UnknownMetric when the metric is absent from the table or the
/// result lacks the mapped raw key.
BiasLevel map_to_level(std::string_view metric_id, const metrics::MetricResult& result, const ThresholdTable& table);

// Calibration.

struct Observation {
  double value = 0;  // transformed raw value
  int level = 1;     // intended level
};

/// Fraction of observations that `e` maps to their intended level.
double accuracy(const ThresholdEntry& e, std::span<const Observation> obs);

/// Best cut-points for one metric. The result maximizes accuracy over all
/// monotone 5-level partitions of the observations; cuts already consistent
/// with that optimum are kept, and the entry is returned unchanged unless
/// accuracy strictly improves.
ThresholdEntry calibrate_entry(const ThresholdEntry& initial, std::span<const Observation> obs);

struct MetricCalibration {
  std::string metric_id;
  std::size_t cases = 0;
  std::size_t failed = 0;  // suite cases where the metric raised an error
  double accuracy_before = 0;
  double accuracy_after = 0;
  std::array<double, 4> cuts_before{};
  std::array<double, 4> cuts_after{};
  /// Some pair of adjacent levels has overlapping value ranges.
  bool separable = true;
};

struct CalibrationReport {
  ThresholdTable table;
  std::vector<MetricCalibration> metrics;
  /// Over every (metric, suite case) pair.
  double accuracy_before = 0;
  double accuracy_after = 0;
  /// Over suite cases, predicting the maximum level across the scenario's metrics.
  double headline_accuracy_before = 0;
  double headline_accuracy_after = 0;
  std::vector<std::string> inseparable;
  double seconds = 0;
};

void to_json(nlohmann::json& j, const CalibrationReport& r);

/// One suite case evaluated: transformed value per metric (absent on error).
struct CaseValues {
  metrics::Scenario scenario = metrics::Scenario::CatDist;
  int level = 1;
  std::map<std::string, double> values;
};

/// Runs the scenario's five metrics on a generated table.
CaseValues evaluate_case(const synthgen::SuiteCase& c, const ThresholdTable& table);

/// Calibrates every metric that appears in `cases`. Throws PreconditionFailed
/// unless each metric has all five levels with >= 3 replicates.
CalibrationReport calibrate(std::span<const CaseValues> cases, const ThresholdTable& initial);

/// Generates and evaluates the suite (in parallel over `jobs` threads) and
/// calibrates. Throws PreconditionFailed for an incomplete suite.
CalibrationReport calibrate(std::span<const synthgen::SuiteCase> suite, const ThresholdTable& initial,
                            unsigned jobs = 1);

}  // namespace biasaudit::severity
