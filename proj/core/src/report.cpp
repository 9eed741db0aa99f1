// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "biasaudit/error.hpp"
#include "biasaudit/reporting.hpp"

namespace biasaudit::reporting {

namespace {

using metrics::Scenario;

// Scenario-specific actions for a moderate or worse headline.
std::vector<std::string> remedies(Scenario s) {
  switch (s) {
    case Scenario::CatDist:
      return {"Rebalance the under-represented categories by targeted collection, oversampling, or reweighting.",
              "Report per-category performance for any model trained on this feature."};
    case Scenario::NumDist:
      return {"Inspect the tails and outliers of the feature before modelling; consider a robust or rank transform.",
              "Check whether the skew reflects collection artefacts rather than the population."};
    case Scenario::CatCat:
      return {"Audit how the outcome was assigned across groups; the association may encode historical decisions.",
              "Evaluate group-conditional error rates and consider reweighting or fairness constraints."};
    case Scenario::CatNum:
      return {"Compare the outcome across groups after adjusting for legitimate covariates.",
              "Investigate mediating variables before attributing the gap to group membership."};
    case Scenario::NumNum:
      return {"Check whether the dependence is causal or proxied; a strong link can make one feature a stand-in "
              "for the other.",
              "Consider decorrelating or dropping the proxy feature when it stands in for a protected attribute."};
  }
  return {};
}

std::string row_cell(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

nlohmann::json number_json(double v) {
  if (std::isfinite(v)) return v;
  return format_value(v);
}

ReportDocument finish(ReportInputs in, bool complete) {
  ReportDocument doc;
  for (const auto& f : in.findings) doc.headline_level = std::max(doc.headline_level, f.level);
  if (doc.headline_level > 0) {
    doc.headline_label = std::string(severity::level_label(doc.headline_level));
    if (in.scenario) doc.recommendations = recommendations_for(*in.scenario, doc.headline_level);
  }
  doc.complete = complete;
  doc.inputs = std::move(in);
  return doc;
}

}  // namespace

Finding make_finding(const metrics::MetricResult& r, const severity::ThresholdTable& table) {
  const auto& e = table.entry(r.metric_id);
  Finding f;
  f.metric_id = r.metric_id;
  f.scenario = r.scenario;
  f.raw = r.raw;
  f.raw_key = e.raw_key;
  f.value = r.at(e.raw_key);
  f.level = severity::map_to_level(r.metric_id, r, table).value;
  f.label = std::string(severity::level_label(f.level));
  f.details = r.details;
  f.n = r.n;
  return f;
}

std::vector<std::string> recommendations_for(Scenario s, int headline_level) {
  if (headline_level <= 1) return {"no action required"};
  if (headline_level == 2) {
    return {fmt::format("Slight {} bias: keep monitoring this feature as the data grows.", metrics::describe(s))};
  }
  std::vector<std::string> out = remedies(s);
  if (headline_level >= 4) {
    out.push_back("Do not use this data for automated decisions until the imbalance is mitigated and re-audited.");
  }
  return out;
}

ReportDocument assemble_report(ReportInputs in) {
  if (in.findings.empty()) throw Error(Errc::NoFindings, "the report has no metric findings");
  return finish(std::move(in), true);
}

ReportDocument incomplete_report(ReportInputs in) { return finish(std::move(in), false); }

const std::vector<std::string>& report_sections() {
  static const std::vector<std::string> sections{"Task",    "Findings",        "Severity", "Visualizations",
                                                 "Methods", "Recommendations", "Status"};
  return sections;
}

std::string render_markdown(const ReportDocument& doc) {
  const auto& in = doc.inputs;
  std::string md = "# Bias detection report\n\n";

  md += "## Task\n\n";
  md += fmt::format("- Request: {}\n", in.task.empty() ? "(none)" : in.task);
  md += fmt::format("- Dataset: {}\n", in.dataset.empty() ? "(none)" : in.dataset);
  md += fmt::format("- Features: {}\n", in.features.empty() ? "(none)" : fmt::format("{}", fmt::join(in.features, ", ")));
  md += fmt::format("- Scenario: {}\n", in.scenario ? metrics::describe(*in.scenario) : "(not determined)");
  md += fmt::format("- Bias type: {}\n",
                    in.scenario ? (metrics::is_distribution(*in.scenario) ? "distribution" : "correlation")
                                : "(not determined)");
  md += fmt::format("- Revision: {}\n\n", in.revision);

  md += "## Findings\n\n";
  if (in.findings.empty()) {
    md += "No metric produced a result.\n\n";
  } else {
    md += "| Metric | Raw values | Scored value | Level | Label | n |\n";
    md += "|---|---|---|---|---|---|\n";
    for (const auto& f : in.findings) {
      std::vector<std::string> raws;
      for (const auto& [k, v] : f.raw) raws.push_back(fmt::format("{}={}", k, format_value(v)));
      md += fmt::format("| {} | {} | {}={} | {} | {} | {} |\n", f.metric_id, row_cell(fmt::format("{}", fmt::join(raws, ", "))),
                        f.raw_key, format_value(f.value), f.level, f.label, f.n);
    }
    md += "\n";
    for (const auto& f : in.findings) {
      if (!f.details.empty()) md += fmt::format("- {}: {}\n", f.metric_id, f.details);
    }
    if (std::any_of(in.findings.begin(), in.findings.end(), [](const Finding& f) { return !f.details.empty(); })) {
      md += "\n";
    }
  }
  if (!in.failures.empty()) {
    md += "Metrics that could not be computed:\n\n";
    for (const auto& f : in.failures) md += fmt::format("- {}: {}\n", f.metric_id, f.error);
    md += "\n";
  }

  md += "## Severity\n\n";
  if (doc.headline_level > 0) {
    md += fmt::format("Headline level: **{} ({})**, the highest level among {} finding(s).\n\n", doc.headline_level,
                      doc.headline_label, in.findings.size());
  } else {
    md += "No severity level could be assigned.\n\n";
  }
  std::vector<std::string> scale;
  for (int l = 1; l <= 5; ++l) scale.push_back(fmt::format("{} {}", l, severity::level_label(l)));
  md += fmt::format("Scale: {}.\n", fmt::join(scale, ", "));
  if (!in.threshold_version.empty()) md += fmt::format("Threshold table: {}.\n", in.threshold_version);
  md += "\n";

  md += "## Visualizations\n\n";
  if (in.charts.empty()) {
    md += "No charts were produced.\n\n";
  } else {
    for (const auto& c : in.charts) md += fmt::format("![{}]({})\n\n", c, c);
  }

  md += "## Methods\n\n";
  if (in.method_ids.empty()) {
    md += "No library methods were consulted.\n\n";
  } else {
    for (const auto& id : in.method_ids) md += fmt::format("- {}\n", id);
    md += "\n";
  }

  md += "## Recommendations\n\n";
  if (doc.recommendations.empty()) {
    md += "None.\n\n";
  } else {
    for (const auto& r : doc.recommendations) md += fmt::format("- {}\n", r);
    md += "\n";
  }

  md += "## Status\n\n";
  md += doc.complete ? "Complete.\n" : "Incomplete: the session stopped before all stages finished.\n";
  if (!in.notes.empty()) {
    md += "\n";
    for (const auto& n : in.notes) md += fmt::format("- {}\n", n);
  }
  return md;
}

nlohmann::json findings_json(const ReportDocument& doc) {
  const auto& in = doc.inputs;
  nlohmann::json j;
  j["task"] = in.task;
  j["dataset"] = in.dataset;
  j["features"] = in.features;
  j["scenario"] = in.scenario ? nlohmann::json(std::string(metrics::to_string(*in.scenario))) : nlohmann::json();
  j["threshold_version"] = in.threshold_version;
  j["revision"] = in.revision;
  j["complete"] = doc.complete;
  j["headline_level"] = doc.headline_level;
  j["headline_label"] = doc.headline_label;
  auto findings = nlohmann::json::array();
  for (const auto& f : in.findings) {
    nlohmann::json raw = nlohmann::json::object();
    for (const auto& [k, v] : f.raw) raw[k] = number_json(v);
    findings.push_back({{"metric_id", f.metric_id},
                        {"raw", raw},
                        {"raw_key", f.raw_key},
                        {"value", number_json(f.value)},
                        {"level", f.level},
                        {"label", f.label},
                        {"n", f.n},
                        {"details", f.details}});
  }
  j["findings"] = std::move(findings);
  auto failures = nlohmann::json::array();
  for (const auto& f : in.failures) failures.push_back({{"metric_id", f.metric_id}, {"error", f.error}});
  j["failures"] = std::move(failures);
  j["charts"] = in.charts;
  j["methods"] = in.method_ids;
  j["recommendations"] = doc.recommendations;
  j["notes"] = in.notes;
  return j;
}

void write_report(const ReportDocument& doc, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::IoError, fmt::format("cannot write '{}'", (dir / name).string()));
    f << text;
  };
  write("report.md", render_markdown(doc));
  write("findings.json", findings_json(doc).dump(2) + "\n");
}

}  // namespace biasaudit::reporting
