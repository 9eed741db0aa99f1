// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "biasaudit/orchestrator.hpp"

namespace biasaudit::orchestrator {

namespace {

using nlohmann::json;

[[noreturn]] void bad_args(std::string_view tool, std::string_view why) {
  throw Error(Errc::InvalidArgument, fmt::format("{}: {}", tool, why));
}

std::string str_arg(const json& args, std::string_view tool, const char* key) {
  const auto it = args.find(key);
  if (it == args.end() || !it->is_string()) bad_args(tool, fmt::format("argument \"{}\" must be a string", key));
  return it->get<std::string>();
}

std::optional<std::string> opt_str(const json& args, const char* key) {
  const auto it = args.find(key);
  if (it == args.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

std::vector<std::string> str_list(const json& args, std::string_view tool, const char* key) {
  const auto it = args.find(key);
  if (it == args.end() || !it->is_array()) bad_args(tool, fmt::format("argument \"{}\" must be a list of names", key));
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) bad_args(tool, fmt::format("argument \"{}\" must be a list of names", key));
    out.push_back(v.get<std::string>());
  }
  return out;
}

json number_json(double v) {
  if (std::isfinite(v)) return v;
  return reporting::format_value(v);
}

const severity::ThresholdTable& thresholds_of(const WorkflowState& s) {
  return s.thresholds ? *s.thresholds : severity::ThresholdTable::defaults();
}

const tabular::Table& table_of(const WorkflowState& s) { return s.working ? *s.working : s.dataset; }

std::vector<std::string> features_or(const WorkflowState& s, const json& args, std::string_view tool) {
  if (args.contains("columns")) return str_list(args, tool, "columns");
  if (s.features.empty()) {
    throw Error(Errc::PreconditionFailed, fmt::format("{}: no features selected; extract columns first", tool));
  }
  return s.features;
}

json column_summary(const tabular::Table& t) {
  auto cols = json::array();
  for (const auto& c : t.columns()) {
    cols.push_back({{"name", c.name()}, {"kind", std::string(tabular::to_string(c.kind()))}, {"missing", c.missing_count()}});
  }
  return {{"table", t.name()}, {"rows", t.row_count()}, {"columns", std::move(cols)}};
}

// New working table: the requested features plus any auxiliary columns the
// task names (mediator, covariate), so later row filtering keeps them aligned.
json extract(WorkflowState& s, const std::vector<std::string>& names) {
  auto picked = tabular::extract_columns(s.dataset, names);
  std::vector<tabular::Column> cols = picked.columns();
  for (const auto& aux : {s.task.mediator, s.task.covariate}) {
    if (!aux || std::find(names.begin(), names.end(), *aux) != names.end()) continue;
    if (std::any_of(cols.begin(), cols.end(), [&](const auto& c) { return c.name() == *aux; })) continue;
    cols.push_back(s.dataset.column(*aux));
  }
  s.working = tabular::Table(picked.name(), std::move(cols));
  s.features = names;
  s.cleaned = false;
  s.scenario.reset();
  s.results.clear();
  s.failures.clear();
  s.charts.clear();
  s.attempts.clear();
  s.results_reviewed = false;
  return column_summary(*s.working);
}

tabular::CleaningMode cleaning_mode(std::string_view tool, const std::string& m) {
  if (m == "drop_row") return tabular::CleaningMode::DropRow;
  if (m == "fill_mode") return tabular::CleaningMode::FillMode;
  if (m == "fill_median") return tabular::CleaningMode::FillMedian;
  bad_args(tool, fmt::format("unknown cleaning mode '{}'", m));
}

tabular::Aggregate aggregate_fn(std::string_view tool, const std::string& f) {
  if (f == "mean") return tabular::Aggregate::Mean;
  if (f == "count") return tabular::Aggregate::Count;
  if (f == "sum") return tabular::Aggregate::Sum;
  if (f == "median") return tabular::Aggregate::Median;
  bad_args(tool, fmt::format("unknown aggregation '{}'", f));
}

json table_rows(const tabular::Table& t) {
  auto rows = json::array();
  for (std::size_t r = 0; r < t.row_count(); ++r) {
    json row = json::object();
    for (const auto& c : t.columns()) {
      if (c.is_missing(r)) {
        row[c.name()] = nullptr;
      } else if (c.is_numerical()) {
        row[c.name()] = c.number(r);
      } else {
        row[c.name()] = c.text(r);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

metrics::MetricOptions options_for(const WorkflowState& s, const json& args) {
  auto o = s.task.metric_options;
  if (auto it = args.find("bins"); it != args.end() && it->is_number_integer()) o.bins = it->get<int>();
  if (auto it = args.find("z_cutoff"); it != args.end() && it->is_number()) o.z_cutoff = it->get<double>();
  if (auto it = args.find("kde_grid"); it != args.end() && it->is_number_integer()) o.kde_grid = it->get<int>();
  if (auto it = args.find("min_support"); it != args.end() && it->is_number_unsigned()) {
    o.min_support = it->get<std::size_t>();
  }
  const auto& t = table_of(s);
  if (s.task.mediator && t.has_column(*s.task.mediator)) o.mediator = t.column(*s.task.mediator);
  if (s.task.covariate && t.has_column(*s.task.covariate)) o.covariate = t.column(*s.task.covariate);
  o.validate();
  return o;
}

json run_metric(WorkflowState& s, const std::string& metric_id, const json& args) {
  const auto tool = metrics::tool_name(metric_id);
  const auto names = features_or(s, args, tool);
  const auto& t = table_of(s);
  std::vector<tabular::Column> cols;
  for (const auto& n : names) cols.push_back(t.column(n));
  const auto scenario = metrics::classify_scenario(cols, s.task.stated);
  const auto wanted = metrics::scenario_of(metric_id);
  if (scenario != wanted) {
    throw Error(Errc::InvalidArgument, fmt::format("{} analyses {} data, but the selected features are {}", tool,
                                                   metrics::describe(wanted), metrics::describe(scenario)));
  }
  s.scenario = scenario;
  auto drop = [&](auto& v) {
    v.erase(std::remove_if(v.begin(), v.end(), [&](const auto& x) { return x.metric_id == metric_id; }), v.end());
  };
  try {
    auto r = metrics::detect(scenario, cols, metric_id, options_for(s, args));
    const auto level = severity::map_to_level(metric_id, r, thresholds_of(s));
    json raw = json::object();
    for (const auto& [k, v] : r.raw) raw[k] = number_json(v);
    json out{{"metric_id", r.metric_id}, {"scenario", std::string(metrics::to_string(r.scenario))},
             {"raw", std::move(raw)},    {"n", r.n},
             {"level", level.value},     {"label", std::string(level.label())},
             {"details", r.details}};
    drop(s.results);
    drop(s.failures);
    s.results.push_back(std::move(r));
    return out;
  } catch (const Error& e) {
    drop(s.failures);
    s.failures.push_back({metric_id, e.what()});
    throw;
  }
}

std::string chart_file(reporting::ChartKind kind, const std::vector<std::string>& cols) {
  std::string name(reporting::to_string(kind));
  for (const auto& c : cols) {
    name += '_';
    for (char ch : c) name += std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' ? ch : '_';
  }
  return name + ".svg";
}

json draw(WorkflowState& s, reporting::ChartKind kind, const json& args) {
  const auto names = features_or(s, args, reporting::tool_name(kind));
  auto spec = reporting::chart_for_columns(kind, table_of(s), names);
  if (auto title = opt_str(args, "title")) spec.title = *title;
  ChartArtifact art{chart_file(kind, names), kind, reporting::render_svg(spec)};
  const auto file = art.file;
  std::erase_if(s.charts, [&](const ChartArtifact& c) { return c.file == file; });
  s.charts.push_back(std::move(art));
  return {{"file", file}, {"kind", std::string(reporting::to_string(kind))}};
}

// Canonical metric order of the scenario, then anything else.
std::vector<metrics::MetricResult> ordered_results(const WorkflowState& s) {
  std::vector<metrics::MetricResult> out;
  if (s.scenario) {
    for (const auto& id : metrics::metric_ids(*s.scenario)) {
      for (const auto& r : s.results) {
        if (r.metric_id == id) out.push_back(r);
      }
    }
  }
  for (const auto& r : s.results) {
    if (!s.scenario || r.scenario != *s.scenario) out.push_back(r);
  }
  return out;
}

json generate_report(WorkflowState& s, const json& args) {
  reporting::ReportInputs in;
  in.task = s.task.question;
  in.dataset = s.task.dataset.filename().string();
  in.features = s.features;
  in.scenario = s.scenario;
  for (const auto& r : ordered_results(s)) in.findings.push_back(reporting::make_finding(r, thresholds_of(s)));
  in.failures = s.failures;
  for (const auto& c : s.charts) in.charts.push_back(c.file);
  std::set<std::string> ids(s.method_ids.begin(), s.method_ids.end());
  if (s.library) {
    for (const auto& e : s.library->entries()) {
      if (!e.tags.tool) continue;
      if (std::any_of(s.results.begin(), s.results.end(),
                      [&](const auto& r) { return metrics::tool_name(r.metric_id) == *e.tags.tool; })) {
        ids.insert(e.id);
      }
    }
  }
  in.method_ids.assign(ids.begin(), ids.end());
  in.notes = s.notes;
  if (auto note = opt_str(args, "note")) in.notes.push_back(*note);
  in.threshold_version = thresholds_of(s).version();
  in.revision = s.revision + 1;
  auto doc = reporting::assemble_report(std::move(in));
  ++s.revision;
  s.replies_at_report = s.user_replies.size();
  s.asks_at_report = s.asks;
  s.report_reviewed = false;
  const bool labelled = std::all_of(doc.inputs.findings.begin(), doc.inputs.findings.end(),
                                    [](const auto& f) { return !f.label.empty(); });
  json out{{"revision", doc.inputs.revision},
           {"headline_level", doc.headline_level},
           {"headline_label", doc.headline_label},
           {"findings", doc.inputs.findings.size()},
           {"labelled", labelled},
           {"charts", doc.inputs.charts.size()},
           {"recommendations", doc.recommendations.size()},
           {"methods", doc.inputs.method_ids},
           {"sections", reporting::report_sections()}};
  s.report = std::move(doc);
  return out;
}

}  // namespace

ToolRegistry builtin_registry() {
  ToolRegistry reg;
  using C = ToolCategory;

  reg.add({"get_csv_features", "{}", "Reads the session's CSV file and returns all feature names (column names).",
           C::Preprocessing, [](WorkflowState& s, const json&) { return json{{"features", s.dataset.column_names()}}; }});
  reg.add({"load_csv_file", "{}", "Loads the session's CSV file and returns its shape and column kinds.",
           C::Preprocessing, [](WorkflowState& s, const json&) {
             s.dataset = tabular::load_table(s.task.dataset, s.task.csv);
             return column_summary(s.dataset);
           }});
  reg.add({"extract_single_column", R"({"column": string})",
           "Extracts a single column from the dataset and makes it the working dataset.", C::Preprocessing,
           [](WorkflowState& s, const json& a) { return extract(s, {str_arg(a, "extract_single_column", "column")}); }});
  reg.add({"extract_two_columns", R"({"columns": [string, string]})",
           "Extracts two columns from the dataset and makes them the working dataset.", C::Preprocessing,
           [](WorkflowState& s, const json& a) {
             auto cols = str_list(a, "extract_two_columns", "columns");
             if (cols.size() != 2) bad_args("extract_two_columns", "exactly two columns are required");
             return extract(s, cols);
           }});
  reg.add({"clean_missing_values", R"({"columns"?: [string], "mode"?: "drop_row"|"fill_mode"|"fill_median"})",
           "Cleans missing or invalid values from specified columns of the working dataset.", C::Preprocessing,
           [](WorkflowState& s, const json& a) {
             std::vector<std::string> cols = a.contains("columns") ? str_list(a, "clean_missing_values", "columns")
                                                                   : s.features;
             tabular::CleaningPolicy policy;
             policy.mode = cleaning_mode("clean_missing_values", opt_str(a, "mode").value_or("drop_row"));
             policy.invalid_tokens = s.task.csv.na_tokens;
             auto r = tabular::clean_missing(table_of(s), cols, policy);
             s.working = std::move(r.table);
             s.cleaned = true;
             return json{{"rows_dropped", r.rows_dropped}, {"cells_filled", r.cells_filled},
                         {"rows", s.working->row_count()}};
           }});
  reg.add({"normalize_or_standardize_data", R"({"column": string, "mode": "normalize"|"standardize"})",
           "Applies 'normalize' or 'standardize' to a column of the working dataset.", C::Preprocessing,
           [](WorkflowState& s, const json& a) {
             const auto col = str_arg(a, "normalize_or_standardize_data", "column");
             const auto mode = str_arg(a, "normalize_or_standardize_data", "mode");
             if (mode != "normalize" && mode != "standardize") {
               bad_args("normalize_or_standardize_data", fmt::format("unknown mode '{}'", mode));
             }
             s.working = tabular::normalize_or_standardize(
                 table_of(s), col, mode == "normalize" ? tabular::ScaleMode::Normalize : tabular::ScaleMode::Standardize);
             return json{{"column", col}, {"mode", mode}, {"rows", s.working->row_count()}};
           }});
  reg.add({"group_and_aggregate", R"({"by": string, "target": string, "fn": "mean"|"count"|"sum"|"median"})",
           "Groups the data by a column and applies an aggregation function on another column.", C::Preprocessing,
           [](WorkflowState& s, const json& a) {
             const auto t = tabular::group_and_aggregate(
                 table_of(s), str_arg(a, "group_and_aggregate", "by"), str_arg(a, "group_and_aggregate", "target"),
                 aggregate_fn("group_and_aggregate", str_arg(a, "group_and_aggregate", "fn")));
             return json{{"rows", table_rows(t)}};
           }});

  static const std::map<std::string, std::string> kMetricText{
      {"shannon_balance", "Shannon entropy and the Balance metric"},
      {"max_min_ratio", "the max/min ratio of category counts"},
      {"entropy", "Shannon entropy and normalized entropy"},
      {"gini", "the Gini index with Laplace smoothing and sample size correction"},
      {"relative_risk", "relative risk of observed against expected frequencies"},
      {"skewness", "skewness to assess asymmetry"},
      {"kurtosis", "kurtosis to assess tailedness"},
      {"outlier", "the share of Z-score outliers"},
      {"cohens_d_mad", "Cohen's d computed with the median absolute deviation"},
      {"quantile_deviation", "quantile deviation, (Q3-Q2)/IQR"},
      {"cramers_v", "Cramer's V from the chi-square statistic"},
      {"elift", "elift, confidence(X -> Y) over confidence(Y)"},
      {"statistical_parity", "statistical parity with Z-scores of proportion differences"},
      {"lipschitz", "a Lipschitz bound on distribution loss differences between groups"},
      {"total_variation", "total variation distance between group and overall distributions"},
      {"max_abs_mean", "the maximum absolute standardized group mean (N value)"},
      {"cohens_d", "Cohen's d effect size between groups"},
      {"standardized_difference", "standardized difference with mean and MAD"},
      {"causal_effect", "the average causal effect of the group as treatment"},
      {"pse", "path-specific effect with the average direct and indirect effects"},
      {"pearson", "Pearson correlation"},
      {"nmi", "normalized mutual information after binning"},
      {"hgr_approximation", "an HGR maximal correlation approximation and chi-square divergence"},
      {"wasserstein", "the Wasserstein-2 distance between standardized marginals"},
      {"hsic", "HSIC with RBF kernels"},
  };
  for (const auto& id : metrics::all_metric_ids()) {
    const auto s = metrics::scenario_of(id);
    const auto text = kMetricText.count(id) ? kMetricText.at(id) : id;
    const bool two = !metrics::is_distribution(s);
    reg.add({metrics::tool_name(id),
             R"({"columns"?: [string], "bins"?: int, "z_cutoff"?: number, "kde_grid"?: int, "min_support"?: int})",
             fmt::format("Analyzes the {} bias {} using {}.", two ? "correlation" : "distribution",
                         two ? fmt::format("between {}", metrics::describe(s)) : fmt::format("of a {}", metrics::describe(s)),
                         text),
             C::Detection, [id](WorkflowState& st, const json& a) { return run_metric(st, id, a); }});
  }

  static const std::map<reporting::ChartKind, std::string> kChartText{
      {reporting::ChartKind::Bar, "Generates a bar chart for a specified column."},
      {reporting::ChartKind::Pie, "Generates a pie chart for a specified column."},
      {reporting::ChartKind::HorizontalBar, "Generates a horizontal bar chart for a specified column."},
      {reporting::ChartKind::Treemap, "Generates a treemap for a specified column."},
      {reporting::ChartKind::Heatmap, "Generates a heatmap for the frequency distribution of a specified column."},
      {reporting::ChartKind::CorrelationHeatmap, "Generates a correlation heatmap for multiple specified columns."},
      {reporting::ChartKind::StackedBar, "Generates a stacked bar chart for two specified categorical columns."},
      {reporting::ChartKind::GroupedBar, "Generates a grouped bar chart for two specified categorical columns."},
      {reporting::ChartKind::Box, "Generates a box plot for a categorical column and a numeric column."},
  };
  for (auto kind : reporting::kAllChartKinds) {
    reg.add({std::string(reporting::tool_name(kind)), R"({"columns"?: [string], "title"?: string})",
             kChartText.at(kind), C::Visualization,
             [kind](WorkflowState& st, const json& a) { return draw(st, kind, a); }});
  }

  reg.add({"get_user_input_tool", R"({"prompt"?: string})",
           "Captures user input during the interaction and adds it to the conversation.", C::Misc,
           [](WorkflowState& s, const json& a) {
             if (!s.input) throw Error(Errc::EndOfInput, "no user input is available in this session");
             const auto m = get_user_input(s, *s.input, opt_str(a, "prompt").value_or("Any follow-up?"));
             return json{{"reply", m.content}};
           }});
  reg.add({"get_all_reference_intentions", "{}",
           "Retrieves all intentions from the method library, with each reference's id.", C::Misc,
           [](WorkflowState& s, const json&) {
             auto out = json::array();
             if (s.library) {
               for (const auto& [id, intention] : methodlib::list_intentions(*s.library)) {
                 out.push_back({{"id", id}, {"intention", intention}});
               }
             }
             return json{{"intentions", std::move(out)}};
           }});
  reg.add({"get_reference_method_by_id", R"({"id": string})",
           "Retrieves the method for a specific reference by id from the method library.", C::Misc,
           [](WorkflowState& s, const json& a) {
             const auto id = str_arg(a, "get_reference_method_by_id", "id");
             if (!s.library) throw Error(Errc::UnknownId, fmt::format("no method library loaded; cannot find '{}'", id));
             const auto& e = methodlib::get_method_by_id(*s.library, id);
             if (std::find(s.method_ids.begin(), s.method_ids.end(), id) == s.method_ids.end()) {
               s.method_ids.push_back(id);
             }
             json j = methodlib::entry_to_json(e);
             j["advisory"] = e.advisory();
             return j;
           }});
  reg.add({"generate_bias_report", R"({"note"?: string})",
           "Generates the bias detection report (markdown and JSON findings) from the results and charts so far.",
           C::Misc, [](WorkflowState& s, const json& a) { return generate_report(s, a); }});
  return reg;
}

}  // namespace biasaudit::orchestrator
