// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <algorithm>
#include <cctype>

#include "biasaudit/orchestrator.hpp"

namespace biasaudit::orchestrator {

namespace {

using nlohmann::json;
using reporting::ChartKind;

constexpr int kMaxAttempts = 2;

Action act(InvokeTool t, std::string why) { return Action{std::move(t), std::move(why)}; }
Action act(Transition t, std::string why) { return Action{t, std::move(why)}; }

int attempts(const WorkflowState& s, const std::string& tool) {
  const auto it = s.attempts.find(tool);
  return it == s.attempts.end() ? 0 : it->second;
}

std::string trim_lower(std::string_view text) {
  std::string out;
  for (char c : text) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const auto b = out.find_first_not_of(" \t\r\n.!");
  if (b == std::string::npos) return {};
  const auto e = out.find_last_not_of(" \t\r\n.!");
  return out.substr(b, e - b + 1);
}

bool is_quit(std::string_view reply) {
  static const std::vector<std::string> kQuit{"quit", "exit", "q", "done", "bye", "stop", "no", "no thanks", "nothing"};
  const auto r = trim_lower(reply);
  return std::find(kQuit.begin(), kQuit.end(), r) != kQuit.end();
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::optional<ChartKind> chart_in_text(std::string_view text) {
  const auto w = words(text);
  const auto has = [&](std::string_view x) { return std::find(w.begin(), w.end(), x) != w.end(); };
  if (has("correlation") && (has("heatmap") || has("heat"))) return ChartKind::CorrelationHeatmap;
  if (has("horizontal")) return ChartKind::HorizontalBar;
  if (has("stacked")) return ChartKind::StackedBar;
  if (has("grouped")) return ChartKind::GroupedBar;
  if (has("heatmap") || (has("heat") && has("map"))) return ChartKind::Heatmap;
  if (has("treemap") || (has("tree") && has("map"))) return ChartKind::Treemap;
  if (has("pie")) return ChartKind::Pie;
  if (has("box") || has("boxplot")) return ChartKind::Box;
  if (has("bar")) return ChartKind::Bar;
  return std::nullopt;
}

// Latest reply naming one or two columns wins, then the task's explicit
// features, then the question text.
std::vector<std::string> desired_features(const WorkflowState& s) {
  const auto columns = s.dataset.column_names();
  for (auto it = s.user_replies.rbegin(); it != s.user_replies.rend(); ++it) {
    auto f = features_in_text(*it, columns);
    if (f.size() == 1 || f.size() == 2) return f;
  }
  if (!s.task.features.empty()) return s.task.features;
  auto f = features_in_text(s.task.question, columns);
  if (f.size() == 1 || f.size() == 2) return f;
  return {};
}

std::optional<metrics::Scenario> scenario_for(const WorkflowState& s, const std::vector<std::string>& features) {
  try {
    std::vector<tabular::Column> cols;
    for (const auto& f : features) cols.push_back(s.dataset.column(f));
    return metrics::classify_scenario(cols, s.task.stated);
  } catch (const Error&) {
    return std::nullopt;
  }
}

json plan_payload(metrics::Scenario sc, const std::vector<std::string>& features) {
  return {{"point", "plan"},
          {"scenario", std::string(metrics::to_string(sc))},
          {"features", features},
          {"steps", planned_tools(sc, features.size())}};
}

InvokeTool extraction(const std::vector<std::string>& features) {
  if (features.size() == 1) return {"extract_single_column", {{"column", features[0]}}};
  return {"extract_two_columns", {{"columns", features}}};
}

InvokeTool cleaning(const std::vector<std::string>& features) {
  return {"clean_missing_values", {{"columns", features}, {"mode", "drop_row"}}};
}

std::vector<ChartKind> desired_charts(const WorkflowState& s, metrics::Scenario sc) {
  std::vector<ChartKind> out{reporting::default_chart(sc)};
  for (const auto& r : s.user_replies) {
    if (auto k = chart_in_text(r); k && std::find(out.begin(), out.end(), *k) == out.end()) out.push_back(*k);
  }
  return out;
}

bool has_chart(const WorkflowState& s, ChartKind k) {
  return std::any_of(s.charts.begin(), s.charts.end(), [k](const ChartArtifact& c) { return c.kind == k; });
}

Critique approve() { return {}; }

void revise(Critique& c, std::string issue, std::optional<Action> fix = std::nullopt) {
  c.verdict = Verdict::Revise;
  c.issues.push_back(std::move(issue));
  if (fix) c.suggested_actions.push_back(std::move(*fix));
}

}  // namespace

std::vector<std::string> planned_tools(metrics::Scenario s, std::size_t feature_count) {
  std::vector<std::string> out{feature_count == 1 ? "extract_single_column" : "extract_two_columns",
                               "clean_missing_values"};
  for (const auto& id : metrics::metric_ids(s)) out.push_back(metrics::tool_name(id));
  out.emplace_back(reporting::tool_name(reporting::default_chart(s)));
  out.emplace_back("generate_bias_report");
  return out;
}

std::vector<Action> canonical_script(metrics::Scenario s, const std::vector<std::string>& features) {
  std::vector<Action> out;
  out.push_back({ConsultAdvisor{plan_payload(s, features)}, "review the detection plan"});
  out.push_back({Transition{Stage::Preprocessing}, ""});
  out.push_back({extraction(features), ""});
  out.push_back({cleaning(features), ""});
  out.push_back({Transition{Stage::Detection}, ""});
  for (const auto& id : metrics::metric_ids(s)) out.push_back({InvokeTool{metrics::tool_name(id), json::object()}, ""});
  out.push_back({ConsultAdvisor{{{"point", "results"}}}, "review the detection results"});
  out.push_back({Transition{Stage::VisualizationSummary}, ""});
  out.push_back({InvokeTool{std::string(reporting::tool_name(reporting::default_chart(s))), json::object()}, ""});
  out.push_back({InvokeTool{"generate_bias_report", json::object()}, ""});
  out.push_back({ConsultAdvisor{{{"point", "report"}}}, "review the report"});
  out.push_back({Transition{Stage::Feedback}, ""});
  out.push_back({Finish{}, ""});
  return out;
}

Action ScriptedPlanner::next(const WorkflowState&) {
  if (next_ >= script_.size()) return Action{Finish{}, "script exhausted"};
  return script_[next_++];
}

Action RulePlanner::next(const WorkflowState& s) {
  for (const auto& a : s.suggestions) {
    if (const auto* t = std::get_if<InvokeTool>(&a.kind); t && attempts(s, t->tool) < kMaxAttempts) {
      return Action{*t, "advisor suggestion"};
    }
  }

  const auto features = desired_features(s);
  std::optional<metrics::Scenario> sc = std::nullopt;
  if (!features.empty()) sc = scenario_for(s, features);
  const bool can_ask = s.task.mode == Mode::Interactive && s.input != nullptr && !s.input_ended;

  switch (s.stage) {
    case Stage::UserInput:
      if (!sc) {
        if (can_ask && s.asks < 3) {
          return Action{AskUser{fmt::format("Which one or two features should be analysed? Available: {}",
                                            fmt::join(s.dataset.column_names(), ", "))},
                        "the task does not name usable features"};
        }
        return Action{Finish{}, "no analysable feature selection"};
      }
      if (!s.plan_reviewed) return Action{ConsultAdvisor{plan_payload(*sc, features)}, "review the detection plan"};
      return act(Transition{Stage::Preprocessing}, "plan approved");

    case Stage::Preprocessing:
      if (!sc) return Action{Finish{}, "no analysable feature selection"};
      if (!s.working || s.features != features) return act(extraction(features), "isolate the features");
      if (!s.cleaned) return act(cleaning(features), "drop rows with missing cells");
      return act(Transition{Stage::Detection}, "data prepared");

    case Stage::Detection: {
      if (!s.working || s.features != features || !s.cleaned) {
        return act(Transition{Stage::Preprocessing}, "features changed");
      }
      if (!sc) return Action{Finish{}, "no analysable feature selection"};
      for (const auto& id : metrics::metric_ids(*sc)) {
        const auto tool = metrics::tool_name(id);
        if (!s.has_result(id) && attempts(s, tool) < kMaxAttempts) {
          return act(InvokeTool{tool, json::object()}, s.has_failure(id) ? "retry after an error" : "run metric");
        }
      }
      if (!s.results_reviewed) return Action{ConsultAdvisor{{{"point", "results"}}}, "review the detection results"};
      return act(Transition{Stage::VisualizationSummary}, "detection complete");
    }

    case Stage::VisualizationSummary: {
      if (!s.working || s.features != features) return act(Transition{Stage::Preprocessing}, "features changed");
      if (sc) {
        for (auto kind : desired_charts(s, *sc)) {
          const std::string tool(reporting::tool_name(kind));
          if (!has_chart(s, kind) && attempts(s, tool) < kMaxAttempts) return act(InvokeTool{tool, json::object()}, "draw chart");
        }
      }
      if (!s.report_current && !s.results.empty()) {
        return act(InvokeTool{"generate_bias_report", json::object()}, "summarize the findings");
      }
      if (s.report && s.report_current && !s.report_reviewed) {
        return Action{ConsultAdvisor{{{"point", "report"}}}, "review the report"};
      }
      return act(Transition{Stage::Feedback}, "report ready");
    }

    case Stage::Feedback: {
      if (!s.report) return Action{Finish{}, "no report could be produced"};
      if (!can_ask) return Action{Finish{}, "done"};
      if (s.user_replies.size() > s.replies_at_report) {
        const auto& reply = s.user_replies.back();
        if (is_quit(reply)) return Action{Finish{}, "user is done"};
        if (features != s.features) return act(Transition{Stage::Preprocessing}, "user asked about other features");
        return act(Transition{Stage::VisualizationSummary}, "revise the report for the follow-up");
      }
      if (s.asks == s.asks_at_report) {
        std::string summary = fmt::format("Report revision {} is ready. Headline: level {} ({}).", s.revision,
                                          s.report->headline_level, s.report->headline_label);
        for (const auto& f : s.report->inputs.findings) {
          summary += fmt::format("\n  {}: level {} ({})", f.metric_id, f.level, f.label);
        }
        summary += "\nAny follow-up (another chart or feature)? Type 'quit' to finish.";
        return Action{AskUser{std::move(summary)}, "collect feedback"};
      }
      return Action{Finish{}, "done"};
    }
  }
  return Action{Finish{}, "unreachable stage"};
}

Critique RuleAdvisor::review(const WorkflowState& s, const json& payload) {
  const auto point = payload.value("point", std::string());
  Critique c = approve();

  auto scenario_of_payload = [&]() -> std::optional<metrics::Scenario> {
    if (auto it = payload.find("scenario"); it != payload.end() && it->is_string()) {
      return metrics::scenario_from_string(it->get<std::string>());
    }
    if (s.scenario) return s.scenario;
    const auto f = desired_features(s);
    return f.empty() ? std::nullopt : scenario_for(s, f);
  };

  if (point == "plan") {
    const auto sc = scenario_of_payload();
    if (!sc) {
      revise(c, "the plan does not identify a scenario for the selected features");
      return c;
    }
    std::vector<std::string> steps;
    if (auto it = payload.find("steps"); it != payload.end() && it->is_array()) {
      for (const auto& v : *it) {
        if (v.is_string()) steps.push_back(v.get<std::string>());
      }
    }
    const auto pos = [&](const std::string& tool) {
      return static_cast<std::ptrdiff_t>(std::find(steps.begin(), steps.end(), tool) - steps.begin());
    };
    const auto end = static_cast<std::ptrdiff_t>(steps.size());
    std::ptrdiff_t first_detection = end;
    for (const auto& id : metrics::metric_ids(*sc)) {
      const auto tool = metrics::tool_name(id);
      const auto p = pos(tool);
      if (p == end) {
        revise(c, fmt::format("the plan does not schedule {}", tool), Action{InvokeTool{tool, json::object()}, ""});
      } else {
        first_detection = std::min(first_detection, p);
      }
    }
    const auto clean = pos("clean_missing_values");
    if (clean == end) {
      revise(c, "the plan does not clean missing values before detection",
             Action{InvokeTool{"clean_missing_values", json::object()}, ""});
    } else if (clean > first_detection) {
      revise(c, "the plan cleans missing values after detection has started");
    }
    return c;
  }

  if (point == "results") {
    const auto sc = scenario_of_payload();
    if (!sc) {
      revise(c, "no detection scenario has been established");
      return c;
    }
    for (const auto& id : metrics::metric_ids(*sc)) {
      const auto tool = metrics::tool_name(id);
      if (s.has_result(id)) continue;
      if (s.has_failure(id)) {
        if (attempts(s, tool) >= kMaxAttempts) continue;
        const auto& f = *std::find_if(s.failures.begin(), s.failures.end(),
                                      [&](const auto& x) { return x.metric_id == id; });
        revise(c, fmt::format("{} failed ({}) and was not retried", tool, f.error),
               Action{InvokeTool{tool, json::object()}, "retry"});
      } else {
        revise(c, fmt::format("{} has not been run", tool), Action{InvokeTool{tool, json::object()}, ""});
      }
    }
    return c;
  }

  if (point == "report") {
    if (!s.report) {
      revise(c, "no report has been generated", Action{InvokeTool{"generate_bias_report", json::object()}, ""});
      return c;
    }
    for (const auto& f : s.report->inputs.findings) {
      if (f.label.empty()) revise(c, fmt::format("finding {} has no level label", f.metric_id));
    }
    if (s.report->headline_level >= 3 && s.report->recommendations.empty()) {
      revise(c, "the report has a moderate or worse headline but no recommendations");
    }
    return c;
  }
  return c;
}

}  // namespace biasaudit::orchestrator
