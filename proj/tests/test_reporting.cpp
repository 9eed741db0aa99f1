// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "biasaudit/error.hpp"
#include "biasaudit/reporting.hpp"

namespace {

using namespace biasaudit;
using namespace biasaudit::reporting;
using tabular::Column;

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

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

tabular::Table sample_table() {
  return tabular::Table("t", {Column::categorical("sex", {"m", "f", "m", "m", "f", "m"}),
                              Column::categorical("income", {"hi", "lo", "lo", "hi", "lo", "hi"}),
                              Column::numerical("age", {30.0, 41.0, 25.0, 52.0, 38.0, 44.0}),
                              Column::numerical("hours", {40.0, 38.0, 20.0, 60.0, 45.0, 50.0})});
}

Finding finding(const char* id, int level) {
  Finding f;
  f.metric_id = id;
  f.level = level;
  f.label = std::string(severity::level_label(level));
  f.raw_key = "x";
  f.value = 0.123456;
  f.raw = {{"x", 0.123456}};
  return f;
}

TEST(Charts, KindNamesRoundTrip) {
  for (auto k : kAllChartKinds) {
    EXPECT_EQ(chart_kind_from_string(to_string(k)), k);
    EXPECT_EQ(chart_kind_from_tool(tool_name(k)), k);
  }
  EXPECT_FALSE(chart_kind_from_string("scatter3d").has_value());
}

TEST(Charts, BarHasOneRectPerCategory) {
  ChartSpec spec{ChartKind::Bar, CategorySeries{{"a", "b"}, {3, 1}}, "t", "x", "y"};
  const auto svg = render_svg(spec);
  EXPECT_EQ(count(svg, "<rect class=\"bar\""), 2u);
  EXPECT_EQ(count(svg, "data-category=\"a\""), 1u);
  EXPECT_EQ(count(svg, "data-category=\"b\""), 1u);
  EXPECT_EQ(svg.rfind("</svg>"), svg.size() - 7);
}

TEST(Charts, SinglePieCategoryIsAFullCircle) {
  const auto svg = render_svg({ChartKind::Pie, CategorySeries{{"only"}, {5}}, "t", "", ""});
  EXPECT_EQ(count(svg, "<circle class=\"wedge\""), 1u);
  EXPECT_EQ(count(svg, "<path class=\"wedge\""), 0u);
  const auto two = render_svg({ChartKind::Pie, CategorySeries{{"a", "b"}, {1, 3}}, "t", "", ""});
  EXPECT_EQ(count(two, "<path class=\"wedge\""), 2u);
}

TEST(Charts, DataErrors) {
  EXPECT_EQ(code_of([] { render_svg({ChartKind::Box, GroupedSamples{{"g"}, {{}}}, "t", "", ""}); }), Errc::EmptyData);
  EXPECT_EQ(code_of([] { render_svg({ChartKind::Bar, CategorySeries{{"a"}, {1, 2}}, "t", "", ""}); }),
            Errc::ArityMismatch);
  EXPECT_EQ(code_of([] { render_svg({ChartKind::Bar, CategorySeries{}, "t", "", ""}); }), Errc::EmptyData);
  EXPECT_EQ(code_of([] { render_svg({ChartKind::Bar, CrossTab{}, "t", "", ""}); }), Errc::ArityMismatch);
  EXPECT_EQ(code_of([] { render_svg({ChartKind::Pie, CategorySeries{{"a"}, {0}}, "t", "", ""}); }), Errc::EmptyData);
  EXPECT_EQ(code_of([] { render_svg({ChartKind::CorrelationHeatmap, Matrix{{"a"}, {{2.0}}}, "t", "", ""}); }),
            Errc::InvalidArgument);
}

TEST(Charts, EveryKindRendersDeterministicallyFromColumns) {
  const auto t = sample_table();
  const std::vector<std::pair<ChartKind, std::vector<std::string>>> cases{
      {ChartKind::Bar, {"sex"}},           {ChartKind::Pie, {"sex"}},
      {ChartKind::HorizontalBar, {"sex"}}, {ChartKind::Treemap, {"income"}},
      {ChartKind::Heatmap, {"sex", "income"}}, {ChartKind::CorrelationHeatmap, {"age", "hours"}},
      {ChartKind::StackedBar, {"sex", "income"}}, {ChartKind::GroupedBar, {"sex", "income"}},
      {ChartKind::Box, {"sex", "age"}}};
  for (const auto& [kind, cols] : cases) {
    SCOPED_TRACE(std::string(to_string(kind)));
    const auto a = render_svg(chart_for_columns(kind, t, cols));
    const auto b = render_svg(chart_for_columns(kind, t, cols));
    EXPECT_EQ(a, b);
    EXPECT_NE(a.find("<svg"), std::string::npos);
  }
}

TEST(Charts, ColumnArityIsChecked) {
  const auto t = sample_table();
  const std::vector<std::string> two{"sex", "income"};
  const std::vector<std::string> num{"age"};
  const std::vector<std::string> mixed{"sex", "age"};
  EXPECT_EQ(code_of([&] { chart_for_columns(ChartKind::Bar, t, two); }), Errc::ArityMismatch);
  EXPECT_EQ(code_of([&] { chart_for_columns(ChartKind::CorrelationHeatmap, t, num); }), Errc::ArityMismatch);
  EXPECT_EQ(code_of([&] { chart_for_columns(ChartKind::StackedBar, t, mixed); }), Errc::ArityMismatch);
}

TEST(Charts, DefaultChartPerScenario) {
  EXPECT_EQ(default_chart(metrics::Scenario::CatDist), ChartKind::Bar);
  EXPECT_EQ(default_chart(metrics::Scenario::NumDist), ChartKind::Box);
  EXPECT_EQ(default_chart(metrics::Scenario::CatCat), ChartKind::StackedBar);
  EXPECT_EQ(default_chart(metrics::Scenario::CatNum), ChartKind::Box);
  EXPECT_EQ(default_chart(metrics::Scenario::NumNum), ChartKind::CorrelationHeatmap);
}

TEST(Charts, WrittenFileMatchesRender) {
  const auto spec = chart_for_columns(ChartKind::Bar, sample_table(), std::vector<std::string>{"sex"});
  const auto path = std::filesystem::temp_directory_path() / "biasaudit_bar.svg";
  render_chart(spec, path);
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), render_svg(spec));
  std::filesystem::remove(path);
}

TEST(Report, HeadlineIsTheMaximumLevel) {
  ReportInputs in;
  in.scenario = metrics::Scenario::CatDist;
  for (int l : {2, 3, 3, 4, 2}) in.findings.push_back(finding("gini", l));
  const auto doc = assemble_report(in);
  EXPECT_EQ(doc.headline_level, 4);
  EXPECT_EQ(doc.headline_label, "biased");
  EXPECT_TRUE(doc.complete);
  EXPECT_FALSE(doc.recommendations.empty());
}

TEST(Report, LevelOneNeedsNoAction) {
  EXPECT_EQ(recommendations_for(metrics::Scenario::CatCat, 1), std::vector<std::string>{"no action required"});
  EXPECT_GT(recommendations_for(metrics::Scenario::CatCat, 5).size(),
            recommendations_for(metrics::Scenario::CatCat, 2).size());
}

TEST(Report, NoFindingsIsAnErrorUnlessIncomplete) {
  EXPECT_EQ(code_of([] { assemble_report({}); }), Errc::NoFindings);
  const auto doc = incomplete_report({});
  EXPECT_FALSE(doc.complete);
  EXPECT_EQ(doc.headline_level, 0);
  EXPECT_NE(render_markdown(doc).find("Incomplete"), std::string::npos);
}

TEST(Report, MarkdownHasEverySectionAndOneRowPerFinding) {
  const auto t = sample_table();
  const auto r = metrics::detect_cat_dist(t.column("sex"), "shannon_balance");
  const auto r2 = metrics::detect_cat_dist(t.column("sex"), "max_min_ratio");
  ReportInputs in;
  in.task = "Is sex balanced?";
  in.features = {"sex"};
  in.scenario = metrics::Scenario::CatDist;
  in.findings = {make_finding(r, severity::ThresholdTable::defaults()),
                 make_finding(r2, severity::ThresholdTable::defaults())};
  in.failures = {{"gini", "SingleCategory: whatever"}};
  in.charts = {"bar_sex.svg"};
  const auto md = render_markdown(assemble_report(in));
  for (const auto& s : report_sections()) EXPECT_NE(md.find("## " + s + "\n"), std::string::npos) << s;
  EXPECT_EQ(count(md, "| shannon_balance |"), 1u);
  EXPECT_EQ(count(md, "| max_min_ratio |"), 1u);
  EXPECT_NE(md.find("![bar_sex.svg](bar_sex.svg)"), std::string::npos);
  EXPECT_NE(md.find("gini: SingleCategory"), std::string::npos);
  EXPECT_NE(md.find("most balanced"), std::string::npos);
}

TEST(Report, NumbersUseFourSignificantDigits) {
  EXPECT_EQ(format_value(0.123456), "0.1235");
  EXPECT_EQ(format_value(12345.678), "1.235e+04");
  EXPECT_EQ(format_value(2.0), "2");
  EXPECT_EQ(format_value(INFINITY), "inf");
  ReportInputs in;
  in.findings = {finding("gini", 2)};
  const auto md = render_markdown(assemble_report(in));
  EXPECT_NE(md.find("x=0.1235"), std::string::npos);
  EXPECT_EQ(md.find("0.123456"), std::string::npos);
}

TEST(Report, WriteReportFiles) {
  ReportInputs in;
  in.findings = {finding("gini", 3)};
  const auto doc = assemble_report(in);
  const auto dir = std::filesystem::temp_directory_path() / "biasaudit_report_test";
  std::filesystem::remove_all(dir);
  write_report(doc, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.md"));
  std::ifstream f(dir / "findings.json");
  const auto j = nlohmann::json::parse(f);
  EXPECT_EQ(j.at("headline_level"), 3);
  EXPECT_EQ(j.at("findings").size(), 1u);
  EXPECT_EQ(findings_json(doc), j);
  std::filesystem::remove_all(dir);
}

}  // namespace
