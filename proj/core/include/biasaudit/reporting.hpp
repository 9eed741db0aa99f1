// SPDX-License-Identifier: Apache-2.0
#pragma once

// SVG charts and the detection report (markdown plus a JSON findings record).

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "biasaudit/metrics.hpp"
#include "biasaudit/severity.hpp"
#include "biasaudit/tabular.hpp"

namespace biasaudit::reporting {

enum class ChartKind { Bar, Pie, HorizontalBar, Treemap, Heatmap, CorrelationHeatmap, StackedBar, GroupedBar, Box };

inline constexpr std::array kAllChartKinds{ChartKind::Bar,        ChartKind::Pie,        ChartKind::HorizontalBar,
                                           ChartKind::Treemap,    ChartKind::Heatmap,    ChartKind::CorrelationHeatmap,
                                           ChartKind::StackedBar, ChartKind::GroupedBar, ChartKind::Box};

/// "bar", "pie", "horizontal_bar", "treemap", "heatmap", "correlation_heatmap",
/// "stacked_bar", "grouped_bar", "box".
std::string_view to_string(ChartKind k) noexcept;
std::optional<ChartKind> chart_kind_from_string(std::string_view s) noexcept;
/// Toolset name, e.g. "plot_bar_chart".
std::string_view tool_name(ChartKind k) noexcept;
std::optional<ChartKind> chart_kind_from_tool(std::string_view tool) noexcept;

/// One value per category (Bar, Pie, HorizontalBar, Treemap, Heatmap).
struct CategorySeries {
  std::vector<std::string> labels;
  std::vector<double> values;
};

/// Counts of row category x column category (StackedBar, GroupedBar, Heatmap).
struct CrossTab {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<std::vector<double>> counts;
};

/// Numerical samples per group (Box).
struct GroupedSamples {
  std::vector<std::string> groups;
  std::vector<std::vector<double>> samples;
};

/// Square matrix with entries in [-1, 1] (CorrelationHeatmap).
struct Matrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;
};

using ChartData = std::variant<CategorySeries, CrossTab, GroupedSamples, Matrix>;

struct ChartSpec {
  ChartKind kind = ChartKind::Bar;
  ChartData data;
  std::string title;
  std::string x_label;
  std::string y_label;
};

/// Standalone SVG document. Identical specs give identical bytes.
/// Errors: ArityMismatch when the data shape does not fit the kind,
/// EmptyData when there is nothing to draw, InvalidArgument for negative
/// counts or correlation entries outside [-1, 1].
std::string render_svg(const ChartSpec& spec);
void render_chart(const ChartSpec& spec, const std::filesystem::path& out);

/// Aggregates table columns into chart data. One column: categories are
/// counted (numerical columns are split into 10 equal-width bins), or for Box
/// the column is a single group. Two columns: CrossTab for two categorical
/// columns, GroupedSamples for (categorical, numerical), a Pearson matrix for
/// CorrelationHeatmap. Missing cells are skipped.
ChartSpec chart_for_columns(ChartKind kind, const tabular::Table& table, std::span<const std::string> columns);

/// Chart the rule-based workflow draws for a scenario: CatDist bar, NumDist
/// box, CatCat stacked bar, CatNum box, NumNum correlation heatmap.
ChartKind default_chart(metrics::Scenario s) noexcept;

struct Finding {
  std::string metric_id;
  metrics::Scenario scenario = metrics::Scenario::CatDist;
  std::map<std::string, double> raw;
  std::string raw_key;
  double value = 0;  // raw[raw_key]
  int level = 1;
  std::string label;
  std::string details;
  std::size_t n = 0;
};

Finding make_finding(const metrics::MetricResult& r, const severity::ThresholdTable& table);

struct FailedMetric {
  std::string metric_id;
  std::string error;
};

struct ReportInputs {
  std::string task;
  std::string dataset;
  std::vector<std::string> features;
  std::optional<metrics::Scenario> scenario;
  std::vector<Finding> findings;
  std::vector<FailedMetric> failures;
  /// Chart file names relative to the report directory.
  std::vector<std::string> charts;
  std::vector<std::string> method_ids;
  /// Short process notes (advisor verdicts, user follow-ups).
  std::vector<std::string> notes;
  std::string threshold_version;
  int revision = 1;
};

struct ReportDocument {
  ReportInputs inputs;
  /// Max finding level; 0 when there are no findings.
  int headline_level = 0;
  std::string headline_label;
  std::vector<std::string> recommendations;
  bool complete = true;
};

/// Fixed rule table keyed by (scenario, headline level).
std::vector<std::string> recommendations_for(metrics::Scenario s, int headline_level);

/// Errors: NoFindings.
ReportDocument assemble_report(ReportInputs in);
/// Report for a session that stopped early; findings may be empty.
ReportDocument incomplete_report(ReportInputs in);

/// Section headings, in order, that every rendered report contains.
const std::vector<std::string>& report_sections();

/// Numbers use 4 significant digits.
std::string render_markdown(const ReportDocument& doc);
nlohmann::json findings_json(const ReportDocument& doc);
/// Writes report.md and findings.json into `dir`.
void write_report(const ReportDocument& doc, const std::filesystem::path& dir);

/// "{:.4g}" with "inf"/"-inf"/"nan" spelled out.
std::string format_value(double v);

}  // namespace biasaudit::reporting
