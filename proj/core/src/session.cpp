// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <fstream>

#include "biasaudit/orchestrator.hpp"

namespace biasaudit::orchestrator {

namespace {

using nlohmann::json;

std::string_view stated_name(metrics::StatedBias b) {
  switch (b) {
    case metrics::StatedBias::Distribution: return "distribution";
    case metrics::StatedBias::Correlation: return "correlation";
    case metrics::StatedBias::Unstated: return "unstated";
  }
  return "unstated";
}

std::string_view kind_name(const Action& a) {
  switch (a.kind.index()) {
    case 0: return "invoke_tool";
    case 1: return "ask_user";
    case 2: return "consult_advisor";
    case 3: return "transition";
    default: return "finish";
  }
}

// Empty when legal, otherwise the reason.
std::string check(const Action& a, const WorkflowState& s, const ToolRegistry& reg) {
  if (const auto* t = std::get_if<InvokeTool>(&a.kind)) {
    if (!reg.contains(t->tool)) return fmt::format("unknown tool '{}'", t->tool);
    if (!t->args.is_object()) return "tool arguments must be an object";
  }
  if (const auto* t = std::get_if<Transition>(&a.kind)) {
    if (!legal_transition(s.stage, t->to)) {
      return fmt::format("illegal transition {} -> {}", to_string(s.stage), to_string(t->to));
    }
  }
  return {};
}

std::string errc_name(const std::exception& e) {
  if (const auto* be = dynamic_cast<const Error*>(&e)) return std::string(to_string(be->code()));
  return std::string(to_string(Errc::ToolError));
}

reporting::ReportDocument partial_report(const WorkflowState& s) {
  if (s.report) {
    auto doc = *s.report;
    doc.complete = false;
    return doc;
  }
  reporting::ReportInputs in;
  in.task = s.task.question;
  in.dataset = s.task.dataset.filename().string();
  in.features = s.features;
  in.scenario = s.scenario;
  const auto& table = s.thresholds ? *s.thresholds : severity::ThresholdTable::defaults();
  for (const auto& r : s.results) in.findings.push_back(reporting::make_finding(r, table));
  in.failures = s.failures;
  for (const auto& c : s.charts) in.charts.push_back(c.file);
  in.method_ids = s.method_ids;
  in.notes = s.notes;
  in.threshold_version = table.version();
  in.revision = s.revision + 1;
  return reporting::incomplete_report(std::move(in));
}

}  // namespace

SessionResult run_session(TaskContext task, Planner& planner, const ToolRegistry& registry, SessionOptions opts) {
  SessionResult res{{}, SessionLog(opts.clock), {}, SessionStatus::Finished, std::nullopt, {}};
  auto& log = res.log;

  WorkflowState st;
  st.task = std::move(task);
  st.budget = opts.budget;
  st.thresholds = opts.thresholds ? opts.thresholds
                                  : std::make_shared<const severity::ThresholdTable>(severity::ThresholdTable::defaults());
  st.library = opts.library;
  ScriptedInput scripted(st.task.follow_ups);
  st.input = opts.input ? opts.input : &scripted;
  st.dataset = tabular::load_table(st.task.dataset, st.task.csv);

  RuleAdvisor rule_advisor;
  Advisor& advisor = opts.advisor ? *opts.advisor : rule_advisor;

  log.append(st.stage, "system", "start",
             {{"task_id", st.task.id},
              {"dataset", st.task.dataset.filename().string()},
              {"question", st.task.question},
              {"features", st.task.features},
              {"bias_type", std::string(stated_name(st.task.stated))},
              {"mode", st.task.mode == Mode::Batch ? "batch" : "interactive"},
              {"planner", std::string(planner.name())},
              {"budget", st.budget},
              {"columns", st.dataset.column_names()},
              {"rows", st.dataset.row_count()}});
  st.transcript.push_back({"user", st.task.question});

  bool finished = false;
  int illegal = 0;
  while (st.budget > 0) {
    Action a;
    std::string why;
    try {
      a = planner.next(st);
      why = check(a, st, registry);
    } catch (const Error& e) {
      if (e.code() != Errc::PlannerError) {
        --st.budget;
        log.append(st.stage, "system", "abort", {{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
        res.status = SessionStatus::Aborted;
        res.error = e.code();
        res.error_message = e.what();
        break;
      }
      why = e.what();
    }
    --st.budget;
    if (!why.empty()) {
      json payload{{"reason", why}};
      if (a.kind.index() == 0 && !std::get<InvokeTool>(a.kind).tool.empty()) payload["action"] = to_json(a);
      log.append(st.stage, "primary", "illegal_action", std::move(payload));
      if (++illegal >= 2) {
        log.append(st.stage, "system", "abort", {{"error", "PlannerError"}, {"message", why}});
        res.status = SessionStatus::Aborted;
        res.error = Errc::PlannerError;
        res.error_message = fmt::format("PlannerError: {}", why);
        break;
      }
      continue;
    }
    illegal = 0;
    log.append(st.stage, "primary", std::string(kind_name(a)), to_json(a));
    if (!a.rationale.empty()) st.transcript.push_back({"primary", a.rationale});

    if (const auto* t = std::get_if<InvokeTool>(&a.kind)) {
      const auto* spec = registry.find(t->tool);
      ++st.attempts[t->tool];
      std::erase_if(st.suggestions, [&](const Action& s) {
        const auto* si = std::get_if<InvokeTool>(&s.kind);
        return si && si->tool == t->tool;
      });
      try {
        auto out = spec->run(st, t->args);
        if (t->tool == "generate_bias_report") {
          st.report_current = true;
        } else if (spec->category != ToolCategory::Misc) {
          st.report_current = false;
        }
        st.transcript.push_back({"tool", fmt::format("{}: {}", t->tool, out.dump())});
        log.append(st.stage, "tool", "tool_result", {{"tool", t->tool}, {"result", std::move(out)}});
      } catch (const std::exception& e) {
        st.transcript.push_back({"tool", fmt::format("{} failed: {}", t->tool, e.what())});
        log.append(st.stage, "tool", "tool_error", {{"tool", t->tool}, {"error", errc_name(e)}, {"message", e.what()}});
      }
    } else if (const auto* q = std::get_if<AskUser>(&a.kind)) {
      if (st.input_ended) {
        ++st.asks;
        log.append(st.stage, "user", "end_of_input", json::object());
      } else {
        try {
          const auto m = get_user_input(st, *st.input, q->prompt);
          st.notes.push_back(fmt::format("Follow-up: {}", m.content));
          st.report_current = false;
          log.append(st.stage, "user", "user_reply", {{"reply", m.content}});
        } catch (const Error& e) {
          if (e.code() != Errc::EndOfInput) throw;
          log.append(st.stage, "user", "end_of_input", json::object());
        }
      }
    } else if (const auto* c = std::get_if<ConsultAdvisor>(&a.kind)) {
      const auto point = c->payload.value("point", std::string());
      const auto critique = advisor.review(st, c->payload);
      if (point == "plan") st.plan_reviewed = true;
      if (point == "results") st.results_reviewed = true;
      if (point == "report") st.report_reviewed = true;
      st.suggestions = critique.verdict == Verdict::Revise ? critique.suggested_actions : std::vector<Action>{};
      for (const auto& issue : critique.issues) st.transcript.push_back({"advisor", issue});
      auto payload = to_json(critique);
      payload["point"] = point;
      log.append(st.stage, "advisor", "critique", std::move(payload));
    } else if (const auto* tr = std::get_if<Transition>(&a.kind)) {
      const auto from = st.stage;
      st.stage = tr->to;
      log.append(st.stage, "system", "stage_changed",
                 {{"from", std::string(to_string(from))}, {"to", std::string(to_string(tr->to))}});
    } else {
      finished = true;
      break;
    }
  }

  if (!finished && res.status == SessionStatus::Finished) {
    res.status = SessionStatus::BudgetExhausted;
    log.append(st.stage, "system", "budget_exhausted", json::object());
  }
  if (finished && st.report) {
    res.report = *st.report;
    res.report.complete = true;
  } else {
    res.report = partial_report(st);
  }
  res.charts = st.charts;
  log.append(st.stage, "system", "end",
             {{"status", std::string(to_string(res.status))},
              {"complete", res.report.complete},
              {"headline_level", res.report.headline_level},
              {"findings", res.report.inputs.findings.size()},
              {"charts", res.charts.size()},
              {"revision", st.revision}});
  return res;
}

void write_session(const SessionResult& r, const std::filesystem::path& dir) {
  reporting::write_report(r.report, dir);
  for (const auto& c : r.charts) {
    std::ofstream f(dir / c.file, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::IoError, fmt::format("cannot write '{}'", (dir / c.file).string()));
    f << c.svg;
  }
  std::error_code ec;
  std::filesystem::create_directories(dir / "logs", ec);
  if (ec) throw Error(Errc::IoError, fmt::format("cannot create '{}': {}", (dir / "logs").string(), ec.message()));
  std::ofstream f(dir / "logs" / "session.jsonl", std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot write the session log");
  f << r.log.to_jsonl();
}

}  // namespace biasaudit::orchestrator
