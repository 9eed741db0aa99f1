// SPDX-License-Identifier: Apache-2.0
#pragma once

// The 25 detection metrics, five per scenario. Every metric is a pure
// function of its input columns and returns raw values only; turning those
// into a severity level is the job of severity.hpp.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biasaudit/tabular.hpp"

namespace biasaudit::metrics {

enum class Scenario { CatDist, NumDist, CatCat, CatNum, NumNum };

/// Stable tags: "cat_dist", "num_dist", "cat_cat", "cat_num", "num_num".
std::string_view to_string(Scenario s) noexcept;
std::optional<Scenario> scenario_from_string(std::string_view tag) noexcept;
/// Human-readable, e.g. "categorical distribution".
std::string_view describe(Scenario s) noexcept;
bool is_distribution(Scenario s) noexcept;

enum class StatedBias { Distribution, Correlation, Unstated };

struct MetricResult {
  std::string metric_id;
  Scenario scenario = Scenario::CatDist;
  std::map<std::string, double> raw;
  std::size_t n = 0;
  std::string details;

  /// Throws UnknownMetric when `key` is absent.
  double at(std::string_view key) const;
};

void to_json(nlohmann::json& j, const MetricResult& r);
void from_json(const nlohmann::json& j, MetricResult& r);

struct MetricOptions {
  int bins = 10;
  double z_cutoff = 3.0;
  int kde_grid = 64;
  /// Minimum cell count for an elift ratio to be considered.
  std::size_t min_support = 5;
  std::optional<tabular::Column> mediator;
  std::optional<tabular::Column> covariate;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument unless bins >= 2, kde_grid >= 8, min_support >= 1.
  void validate() const;
};

/// The five metric ids of a scenario, in canonical order.
const std::vector<std::string>& metric_ids(Scenario s);
const std::vector<std::string>& all_metric_ids();
/// Throws UnknownMetric.
Scenario scenario_of(std::string_view metric_id);
/// Toolset name, e.g. "categorical_distribution_shannon_balance".
std::string tool_name(std::string_view metric_id);
/// Inverse of tool_name(); nullopt for anything that is not a detection tool.
std::optional<std::string> metric_from_tool(std::string_view tool);

// Column entry points skip rows with a missing cell in any involved column.

MetricResult detect_cat_dist(const tabular::Column& col, std::string_view metric_id, const MetricOptions& opts = {});
/// Counts per declared category; a zero count is allowed and drives
/// max_min_ratio to +infinity.
MetricResult cat_dist_from_counts(std::span<const double> counts, std::string_view metric_id,
                                  const MetricOptions& opts = {});

MetricResult detect_num_dist(const tabular::Column& col, std::string_view metric_id, const MetricOptions& opts = {});
MetricResult num_dist_from_values(std::span<const double> values, std::string_view metric_id,
                                  const MetricOptions& opts = {});

/// `a` indexes groups (rows of the contingency table), `b` outcomes.
MetricResult detect_cat_cat(const tabular::Column& a, const tabular::Column& b, std::string_view metric_id,
                            const MetricOptions& opts = {});
using Contingency = std::vector<std::vector<double>>;
MetricResult cat_cat_from_table(const Contingency& table, std::string_view metric_id, const MetricOptions& opts = {});

MetricResult detect_cat_num(const tabular::Column& group, const tabular::Column& outcome, std::string_view metric_id,
                            const MetricOptions& opts = {});

MetricResult detect_num_num(const tabular::Column& x, const tabular::Column& y, std::string_view metric_id,
                            const MetricOptions& opts = {});
MetricResult num_num_from_values(std::span<const double> x, std::span<const double> y, std::string_view metric_id,
                                 const MetricOptions& opts = {});

/// One column gives a distribution scenario, two a correlation scenario.
/// Errors: UnsupportedArity (0 or >2 columns), InvalidArgument when the stated
/// bias type contradicts the column count.
Scenario classify_scenario(std::span<const tabular::Column> cols, StatedBias stated);

/// Dispatches on the scenario, reordering a (numerical, categorical) pair.
MetricResult detect(Scenario scenario, std::span<const tabular::Column> cols, std::string_view metric_id,
                    const MetricOptions& opts = {});

}  // namespace biasaudit::metrics
