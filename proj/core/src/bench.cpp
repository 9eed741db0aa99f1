// SPDX-License-Identifier: Apache-2.0
#include "biasaudit/bench.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "biasaudit/error.hpp"
#include "biasaudit/reporting.hpp"

namespace biasaudit::bench {

namespace {

using nlohmann::json;
using orchestrator::LogEvent;
using orchestrator::SessionLog;

[[noreturn]] void schema(std::string_view where, std::string_view why) {
  throw Error(Errc::SchemaError, fmt::format("{}: {}", where, why));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, fmt::format("cannot write '{}'", p.string()));
  f << text;
}

std::string fmt_score(const std::optional<EndResultScore>& s, double EndResultScore::*field, const char* spec) {
  if (!s) return "n/a";
  return fmt::format(fmt::runtime(spec), (*s).*field);
}

}  // namespace

std::string_view to_string(BiasType t) noexcept {
  switch (t) {
    case BiasType::Distribution: return "Distribution";
    case BiasType::Correlation: return "Correlation";
    case BiasType::Implication: return "Implication";
  }
  return "Distribution";
}

std::optional<BiasType> bias_type_from_string(std::string_view s) noexcept {
  const auto l = lower(s);
  if (l == "distribution") return BiasType::Distribution;
  if (l == "correlation") return BiasType::Correlation;
  if (l == "implication") return BiasType::Implication;
  return std::nullopt;
}

metrics::StatedBias stated_bias(BiasType t) noexcept {
  switch (t) {
    case BiasType::Distribution: return metrics::StatedBias::Distribution;
    case BiasType::Correlation: return metrics::StatedBias::Correlation;
    case BiasType::Implication: return metrics::StatedBias::Unstated;
  }
  return metrics::StatedBias::Unstated;
}

TaskSpec task_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) schema("task", "each task must be a JSON object");
  TaskSpec t;
  auto text = [&](const char* key, bool required) -> std::string {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (required) schema(t.id.empty() ? "task" : t.id, fmt::format("missing field \"{}\"", key));
      return {};
    }
    if (!it->is_string()) schema(t.id.empty() ? "task" : t.id, fmt::format("field \"{}\" must be text", key));
    return it->get<std::string>();
  };
  t.id = text("id", true);
  const auto dataset = text("dataset", true);
  t.dataset = std::filesystem::path(dataset).is_absolute() || base_dir.empty() ? std::filesystem::path(dataset)
                                                                               : base_dir / dataset;
  t.question = text("question", true);
  const auto type = text("bias_type", true);
  const auto bt = bias_type_from_string(type);
  if (!bt) schema(t.id, fmt::format("unknown bias_type '{}'", type));
  t.bias_type = *bt;
  const auto f = j.find("features");
  if (f == j.end() || !f->is_array()) schema(t.id, "field \"features\" must be a list of names");
  for (const auto& v : *f) {
    if (!v.is_string()) schema(t.id, "feature names must be text");
    t.features.push_back(v.get<std::string>());
  }
  const auto n = t.features.size();
  const bool ok = (t.bias_type == BiasType::Distribution && n == 1) || (t.bias_type == BiasType::Correlation && n == 2) ||
                  (t.bias_type == BiasType::Implication && (n == 1 || n == 2));
  if (!ok) schema(t.id, fmt::format("{} task with {} feature(s)", to_string(t.bias_type), n));
  t.significance = text("significance", false);
  if (auto m = text("mediator", false); !m.empty()) t.mediator = m;
  if (auto c = text("covariate", false); !c.empty()) t.covariate = c;
  return t;
}

json task_to_json(const TaskSpec& t) {
  json j{{"id", t.id},
         {"dataset", t.dataset.generic_string()},
         {"question", t.question},
         {"bias_type", std::string(to_string(t.bias_type))},
         {"features", t.features},
         {"significance", t.significance}};
  if (t.mediator) j["mediator"] = *t.mediator;
  if (t.covariate) j["covariate"] = *t.covariate;
  return j;
}

std::vector<TaskSpec> load_taskset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::FileNotFound, fmt::format("cannot open task set '{}'", path.string()));
  std::ostringstream ss;
  ss << f.rdbuf();
  const auto text = ss.str();
  if (std::all_of(text.begin(), text.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
    return {};
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    schema(path.string(), e.what());
  }
  if (!j.is_array()) schema(path.string(), "a task set must be a JSON array");
  std::vector<TaskSpec> out;
  for (const auto& t : j) {
    out.push_back(task_from_json(t, path.parent_path()));
    for (std::size_t i = 0; i + 1 < out.size(); ++i) {
      if (out[i].id == out.back().id) schema(out.back().id, "duplicate task id");
    }
  }
  return out;
}

void save_taskset(std::span<const TaskSpec> tasks, const std::filesystem::path& path) {
  auto arr = json::array();
  for (const auto& t : tasks) arr.push_back(task_to_json(t));
  write_text(path, arr.dump(2) + "\n");
}

orchestrator::TaskContext task_context(const TaskSpec& t) {
  orchestrator::TaskContext c;
  c.id = t.id;
  c.dataset = t.dataset;
  c.question = t.question;
  c.features = t.features;
  c.stated = stated_bias(t.bias_type);
  c.mediator = t.mediator;
  c.covariate = t.covariate;
  return c;
}

OracleResult ground_truth(const TaskSpec& task, const tabular::Table& table, const severity::ThresholdTable& thresholds,
                          const metrics::MetricOptions& options) {
  std::vector<const tabular::Column*> feats;
  for (const auto& f : task.features) feats.push_back(&table.column(f));
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    if (std::none_of(feats.begin(), feats.end(), [r](const auto* c) { return c->is_missing(r); })) keep.push_back(r);
  }
  std::vector<tabular::Column> cols;
  for (const auto* c : feats) cols.push_back(c->take(keep));

  OracleResult out;
  out.scenario = metrics::classify_scenario(cols, stated_bias(task.bias_type));
  auto opts = options;
  if (task.mediator) opts.mediator = table.column(*task.mediator).take(keep);
  if (task.covariate) opts.covariate = table.column(*task.covariate).take(keep);

  int y = 0;
  for (const auto& id : metrics::metric_ids(out.scenario)) {
    try {
      const auto r = metrics::detect(out.scenario, cols, id, opts);
      const int level = severity::map_to_level(id, r, thresholds).value;
      out.levels[id] = level;
      y = std::max(y, level);
    } catch (const Error& e) {
      out.errors[id] = e.what();
    }
  }
  if (out.levels.empty()) {
    throw Error(Errc::AllMetricsFailed, fmt::format("task {}: none of the {} metrics produced a level", task.id,
                                                    metrics::to_string(out.scenario)));
  }
  out.y = y;
  return out;
}

EndResultScore score_end_results(std::span<const EndResultRecord> records) {
  if (records.empty()) throw Error(Errc::EmptyRecords, "no end-result records to score");
  double sim = 0, err = 0;
  for (const auto& r : records) {
    if (r.x < 1 || r.x > 5 || r.y < 1 || r.y > 5) {
      throw Error(Errc::InvalidArgument, fmt::format("task {}: levels must lie in 1..5", r.task_id));
    }
    const double d = std::abs(r.x - r.y);
    sim += 1.0 - d / 4.0;
    err += d;
  }
  const double n = static_cast<double>(records.size());
  return {100.0 * sim / n, err / n, records.size()};
}

std::string_view to_string(Dimension d) noexcept {
  switch (d) {
    case Dimension::Communication: return "Communication";
    case Dimension::Planning: return "Planning";
    case Dimension::Tooling: return "Tooling";
    case Dimension::Adaptivity: return "Adaptivity";
    case Dimension::Summarization: return "Summarization";
    case Dimension::Integration: return "Integration";
  }
  return "Communication";
}

std::string_view to_string(Rating r) noexcept {
  switch (r) {
    case Rating::Excellent: return "Excellent";
    case Rating::Proficient: return "Proficient";
    case Rating::Adequate: return "Adequate";
    case Rating::Mediocre: return "Mediocre";
    case Rating::Unsatisfactory: return "Unsatisfactory";
  }
  return "Unsatisfactory";
}

Rating rating_for(double score) noexcept {
  if (score >= 90) return Rating::Excellent;
  if (score >= 75) return Rating::Proficient;
  if (score >= 60) return Rating::Adequate;
  if (score >= 40) return Rating::Mediocre;
  return Rating::Unsatisfactory;
}

json to_json(const ProcessScores& p) {
  json j = json::object();
  for (auto d : kAllDimensions) {
    const auto& s = p.at(d);
    j[std::string(to_string(d))] = {{"score", s.score}, {"rating", std::string(to_string(s.rating))}, {"evidence", s.evidence}};
  }
  return j;
}

ProcessScores HeuristicJudge::score(const SessionLog& log) {
  const auto& ev = log.events();
  auto is = [](const LogEvent& e, std::string_view actor, std::string_view action) {
    return e.actor == actor && e.action == action;
  };
  auto tool_of = [](const LogEvent& e) { return e.payload.value("tool", std::string()); };

  // The last plan handed to the advisor.
  const json* plan = nullptr;
  for (const auto& e : ev) {
    if (is(e, "primary", "consult_advisor") && e.payload.contains("payload") &&
        e.payload["payload"].value("point", std::string()) == "plan") {
      plan = &e.payload["payload"];
    }
  }

  ProcessScores out;
  auto set = [&](Dimension d, double score, std::string evidence) {
    score = std::clamp(score, 0.0, 100.0);
    out.at(d) = {score, rating_for(score), std::move(evidence)};
  };

  // Communication.
  {
    double s = 0;
    std::vector<std::string> why;
    if (!ev.empty() && !ev.front().payload.value("question", std::string()).empty()) {
      s += 40;
      why.emplace_back("task question recorded");
    }
    if (plan && plan->contains("features") && plan->contains("scenario") && !(*plan)["features"].empty()) {
      s += 35;
      why.emplace_back("plan restates features and scenario");
    }
    const bool asked = std::any_of(ev.begin(), ev.end(), [&](const auto& e) { return is(e, "primary", "ask_user"); });
    const bool answered = std::any_of(ev.begin(), ev.end(), [&](const auto& e) { return is(e, "user", "user_reply"); });
    if (asked && answered) {
      s += 25;
      why.emplace_back("user consulted and answered");
    } else {
      why.emplace_back("no user exchange");
    }
    set(Dimension::Communication, s, fmt::format("{}", fmt::join(why, "; ")));
  }

  // Scenario: from the plan, else from the first detection result.
  std::optional<metrics::Scenario> sc;
  if (plan && plan->contains("scenario") && (*plan)["scenario"].is_string()) {
    sc = metrics::scenario_from_string((*plan)["scenario"].get<std::string>());
  }
  std::vector<std::string> invoked;
  std::size_t errors = 0;
  for (const auto& e : ev) {
    if (is(e, "primary", "invoke_tool")) invoked.push_back(tool_of(e));
    if (is(e, "tool", "tool_error")) ++errors;
    if (!sc && is(e, "tool", "tool_result") && e.payload.contains("result") && e.payload["result"].is_object()) {
      if (auto it = e.payload["result"].find("scenario"); it != e.payload["result"].end() && it->is_string()) {
        sc = metrics::scenario_from_string(it->get<std::string>());
      }
    }
  }

  // Planning.
  {
    std::vector<std::string> steps;
    if (plan && plan->contains("steps") && (*plan)["steps"].is_array()) {
      for (const auto& v : (*plan)["steps"]) {
        if (v.is_string()) steps.push_back(v.get<std::string>());
      }
    } else {
      steps = invoked;
    }
    double s = plan ? 20 : 0;
    std::size_t covered = 0;
    std::ptrdiff_t first_detection = static_cast<std::ptrdiff_t>(steps.size());
    if (sc) {
      for (const auto& id : metrics::metric_ids(*sc)) {
        const auto it = std::find(steps.begin(), steps.end(), metrics::tool_name(id));
        if (it != steps.end()) {
          ++covered;
          first_detection = std::min(first_detection, it - steps.begin());
        }
      }
    }
    s += 60.0 * static_cast<double>(covered) / 5.0;
    const auto clean = std::find(steps.begin(), steps.end(), "clean_missing_values");
    const bool clean_first = clean != steps.end() && clean - steps.begin() < first_detection;
    if (clean_first) s += 20;
    set(Dimension::Planning, s,
        fmt::format("{}; {}/5 scenario metrics covered; cleaning {}", plan ? "explicit plan" : "no explicit plan",
                    covered, clean_first ? "before detection" : "not scheduled before detection"));
  }

  // Tooling.
  if (invoked.empty()) {
    set(Dimension::Tooling, 20, "no tool was invoked");
  } else {
    std::vector<std::string> distinct = invoked;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const double coverage = static_cast<double>(std::min<std::size_t>(distinct.size(), 7)) / 7.0;
    const double err_rate = static_cast<double>(errors) / static_cast<double>(invoked.size());
    set(Dimension::Tooling, 100.0 * (0.6 * coverage + 0.4 * (1.0 - err_rate)),
        fmt::format("{} invocations of {} distinct tools, {} error(s)", invoked.size(), distinct.size(), errors));
  }

  // Adaptivity.
  if (errors == 0) {
    set(Dimension::Adaptivity, 85, "no tool errors to recover from");
  } else {
    std::size_t recovered = 0;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      if (!is(ev[i], "tool", "tool_error")) continue;
      const auto tool = tool_of(ev[i]);
      for (std::size_t k = i + 1; k < ev.size(); ++k) {
        if ((is(ev[k], "primary", "invoke_tool") && tool_of(ev[k]) == tool) || is(ev[k], "primary", "consult_advisor")) {
          ++recovered;
          break;
        }
      }
    }
    const double share = static_cast<double>(recovered) / static_cast<double>(errors);
    set(Dimension::Adaptivity, 40 + 60 * share, fmt::format("{}/{} tool errors followed by a recovery action", recovered, errors));
  }

  // Summarization.
  {
    const json* report = nullptr;
    for (const auto& e : ev) {
      if (is(e, "tool", "tool_result") && tool_of(e) == "generate_bias_report") report = &e.payload["result"];
    }
    if (!report) {
      set(Dimension::Summarization, 0, "no report was generated");
    } else {
      const auto& r = *report;
      const bool parts[5] = {r.value("findings", 0) > 0, r.value("labelled", false), r.value("headline_level", 0) > 0,
                             r.value("charts", 0) > 0, r.value("recommendations", 0) > 0};
      const double s = 20.0 * static_cast<double>(std::count(std::begin(parts), std::end(parts), true));
      set(Dimension::Summarization, s,
          fmt::format("report with {} finding(s), {} chart(s), {} recommendation(s)", r.value("findings", 0),
                      r.value("charts", 0), r.value("recommendations", 0)));
    }
  }

  // Integration.
  {
    bool legal = true;
    for (const auto& e : ev) {
      if (is(e, "primary", "illegal_action")) legal = false;
      if (is(e, "system", "stage_changed")) {
        const auto from = orchestrator::stage_from_string(e.payload.value("from", std::string()));
        const auto to = orchestrator::stage_from_string(e.payload.value("to", std::string()));
        if (!from || !to || !orchestrator::legal_transition(*from, *to)) legal = false;
      }
    }
    const bool complete = ev.back().payload.value("complete", false);
    set(Dimension::Integration, (legal ? 50 : 0) + (complete ? 50 : 0),
        fmt::format("transitions {}; session {}", legal ? "legal" : "include illegal steps",
                    complete ? "completed with a report" : "did not complete"));
  }
  return out;
}

ChatJudge::ChatJudge(orchestrator::ChatConfig cfg, std::shared_ptr<net::HttpClient> client)
    : cfg_(std::move(cfg)), client_(client ? std::move(client) : net::default_client()) {}

ProcessScores ChatJudge::score(const SessionLog& log) {
  constexpr std::string_view kRubric =
      "You evaluate the intermediate process of a bias detection agent from its JSON-lines log. Rate each "
      "dimension from 0 to 100: Communication (effective communication with the user to clarify the task), "
      "Planning (comprehensiveness and thoroughness of planning), Tooling (efficiency in tool execution), "
      "Adaptivity (ability to adjust plans based on execution results), Summarization (clarity and depth of "
      "results analysis and summary), Integration (end-to-end coherence of the workflow). Bands: 90+ Excellent, "
      "75+ Proficient, 60+ Adequate, 40+ Mediocre, below Unsatisfactory. Reply with one JSON object mapping each "
      "dimension name to {\"score\": number, \"evidence\": text}.";
  json body{{"model", cfg_.model},
            {"temperature", 0},
            {"messages", json::array({{{"role", "system"}, {"content", kRubric}},
                                      {{"role", "user"}, {"content", log.to_jsonl()}}})}};
  const auto response = orchestrator::chat_request(*client_, cfg_, body);
  json j;
  try {
    auto content = response.at("choices").at(0).at("message").at("content").get<std::string>();
    if (auto a = content.find('{'), b = content.rfind('}'); a != std::string::npos && b != std::string::npos && b > a) {
      content = content.substr(a, b - a + 1);
    }
    j = json::parse(content);
  } catch (const json::exception& e) {
    throw Error(Errc::PlannerError, fmt::format("judge reply unusable: {}", e.what()));
  }
  ProcessScores out;
  for (auto d : kAllDimensions) {
    const auto it = j.find(std::string(to_string(d)));
    if (it == j.end() || !it->is_object() || !it->contains("score") || !(*it)["score"].is_number()) {
      throw Error(Errc::PlannerError, fmt::format("judge reply lacks a score for {}", to_string(d)));
    }
    const double s = std::clamp((*it)["score"].get<double>(), 0.0, 100.0);
    out.at(d) = {s, rating_for(s), it->value("evidence", std::string())};
  }
  return out;
}

ProcessScores score_process(const SessionLog& log, Judge& judge) {
  const auto& ev = log.events();
  if (ev.empty()) throw Error(Errc::MalformedLog, "empty session log");
  if (ev.front().action != "start") throw Error(Errc::MalformedLog, "log does not begin with a start event");
  if (ev.back().action != "end") throw Error(Errc::MalformedLog, "log is truncated: no end event");
  return judge.score(log);
}

std::string render_process_report(const std::string& task_id, const ProcessScores& scores) {
  std::string md = fmt::format("# Process evaluation: {}\n\n| Dimension | Score | Rating | Evidence |\n|---|---|---|---|\n", task_id);
  for (auto d : kAllDimensions) {
    const auto& s = scores.at(d);
    md += fmt::format("| {} | {:.1f} | {} | {} |\n", to_string(d), s.score, to_string(s.rating), s.evidence);
  }
  return md;
}

std::size_t BenchmarkReport::failed() const {
  return static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return !o.record; }));
}

BenchmarkReport run_benchmark(std::span<const TaskSpec> tasks, const orchestrator::ToolRegistry& registry,
                              const BenchmarkOptions& options) {
  if (tasks.empty()) throw Error(Errc::EmptyRecords, "the task set is empty");
  const auto thresholds = options.thresholds ? options.thresholds
                                             : std::make_shared<const severity::ThresholdTable>(
                                                   severity::ThresholdTable::defaults());
  HeuristicJudge heuristic;
  Judge& judge = options.judge ? *options.judge : heuristic;

  BenchmarkReport report;
  report.outcomes.resize(tasks.size());

  auto run_one = [&](std::size_t i) {
    auto& out = report.outcomes[i];
    out.task = tasks[i];
    try {
      const auto ctx = task_context(tasks[i]);
      auto planner = options.planner ? options.planner() : std::make_unique<orchestrator::RulePlanner>();
      auto advisor = options.advisor ? options.advisor() : std::make_unique<orchestrator::RuleAdvisor>();
      orchestrator::SessionOptions so;
      so.budget = options.budget;
      so.thresholds = thresholds;
      so.library = options.library;
      so.advisor = advisor.get();
      so.clock = options.clock ? options.clock() : orchestrator::frozen_clock();
      auto session = orchestrator::run_session(ctx, *planner, registry, so);
      out.process = score_process(session.log, judge);
      const int x = session.report.headline_level;
      out.session = std::move(session);
      if (x < 1) throw Error(Errc::NoFindings, "the session produced no headline level");
      const auto table = tabular::load_table(tasks[i].dataset);
      const auto oracle = ground_truth(tasks[i], table, *thresholds);
      out.record = EndResultRecord{tasks[i].id, tasks[i].bias_type, x, oracle.y, oracle.levels};
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  };

  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(tasks.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) run_one(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  auto row = [&](std::string label, std::optional<BiasType> type) {
    std::vector<EndResultRecord> recs;
    for (const auto& o : report.outcomes) {
      if (o.record && (!type || o.record->bias_type == *type)) recs.push_back(*o.record);
    }
    TypeRow r{std::move(label), recs.size(), std::nullopt};
    if (!recs.empty()) r.score = score_end_results(recs);
    return r;
  };
  for (auto t : {BiasType::Distribution, BiasType::Correlation, BiasType::Implication}) {
    report.rows.push_back(row(std::string(to_string(t)), t));
  }
  report.rows.push_back(row("Overall", std::nullopt));

  std::size_t scored = 0;
  for (const auto& o : report.outcomes) {
    if (!o.process) continue;
    ++scored;
    for (std::size_t d = 0; d < 6; ++d) report.process_means[d] += o.process->dims[d].score;
  }
  if (scored > 0) {
    for (auto& m : report.process_means) m /= static_cast<double>(scored);
  }
  return report;
}

std::string render_benchmark_markdown(const BenchmarkReport& r) {
  std::string md = "# Benchmark results\n\n## End results\n\n| Bias type | Tasks | S_avg (%) | MAE |\n|---|---|---|---|\n";
  for (const auto& row : r.rows) {
    md += fmt::format("| {} | {} | {} | {} |\n", row.label, row.n, fmt_score(row.score, &EndResultScore::s_avg, "{:.2f}"),
                      fmt_score(row.score, &EndResultScore::mae, "{:.3f}"));
  }
  md += "\n## Process scores (mean)\n\n| Dimension | Score | Rating |\n|---|---|---|\n";
  for (auto d : kAllDimensions) {
    const double s = r.process_means[static_cast<std::size_t>(d)];
    md += fmt::format("| {} | {:.1f} | {} |\n", to_string(d), s, to_string(rating_for(s)));
  }
  md += "\n## Tasks\n\n| Task | Type | Predicted | Ground truth | Status |\n|---|---|---|---|---|\n";
  for (const auto& o : r.outcomes) {
    if (o.record) {
      md += fmt::format("| {} | {} | {} | {} | ok |\n", o.task.id, to_string(o.task.bias_type), o.record->x, o.record->y);
    } else {
      std::string err = o.error;
      std::replace(err.begin(), err.end(), '|', '/');
      md += fmt::format("| {} | {} | - | - | failed: {} |\n", o.task.id, to_string(o.task.bias_type), err);
    }
  }
  return md;
}

json benchmark_json(const BenchmarkReport& r) {
  auto rows = json::array();
  for (const auto& row : r.rows) {
    json j{{"bias_type", row.label}, {"n", row.n}};
    j["s_avg"] = row.score ? json(row.score->s_avg) : json();
    j["mae"] = row.score ? json(row.score->mae) : json();
    rows.push_back(std::move(j));
  }
  auto tasks = json::array();
  for (const auto& o : r.outcomes) {
    json j{{"id", o.task.id}, {"bias_type", std::string(to_string(o.task.bias_type))}};
    if (o.record) {
      j["predicted"] = o.record->x;
      j["ground_truth"] = o.record->y;
      j["oracle_levels"] = o.record->oracle_levels;
    } else {
      j["error"] = o.error;
    }
    if (o.process) j["process"] = to_json(*o.process);
    tasks.push_back(std::move(j));
  }
  json means = json::object();
  for (auto d : kAllDimensions) means[std::string(to_string(d))] = r.process_means[static_cast<std::size_t>(d)];
  return {{"rows", std::move(rows)}, {"process_means", std::move(means)}, {"tasks", std::move(tasks)}, {"failed", r.failed()}};
}

void write_benchmark(const BenchmarkReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  write_text(dir / "benchmark.md", render_benchmark_markdown(r));
  write_text(dir / "results.json", benchmark_json(r).dump(2) + "\n");
  for (const auto& o : r.outcomes) {
    if (!o.session) continue;
    const auto task_dir = dir / o.task.id;
    orchestrator::write_session(*o.session, task_dir);
    if (o.process) write_text(task_dir / "process.md", render_process_report(o.task.id, *o.process));
  }
}

}  // namespace biasaudit::bench
