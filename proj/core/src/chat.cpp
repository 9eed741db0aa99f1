// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include "biasaudit/orchestrator.hpp"

namespace biasaudit::orchestrator {

namespace {

using nlohmann::json;

constexpr std::string_view kPrimaryPrompt =
    "You are the primary agent of a bias detection system for structured data. Your tasks:\n"
    "- Communicate with the user: restate the question, the feature(s) involved and the bias type.\n"
    "- Develop a detection plan covering data loading and preprocessing, detection and analysis methods, "
    "visualization, and result summarization.\n"
    "- Select appropriate tools from the toolset and the bias detection method library.\n"
    "- Give the user a detailed summary of the results through generate_bias_report.\n"
    "The workflow stages are user_input, preprocessing, detection, visualization_summary and feedback; move "
    "forward one stage at a time or back to any earlier stage. Consult the advisor after planning, after "
    "detection and before finishing. Reply with exactly one tool call per turn.";

constexpr std::string_view kAdvisorPrompt =
    "You are the advisor agent of a bias detection system. Your tasks:\n"
    "- Assess whether the primary agent's actions align with the user's intent.\n"
    "- Optimize the execution plan and point out omissions.\n"
    "- Improve tool selection and give feedback on execution results and errors.\n"
    "- Revise the result summary presented to the user.\n"
    "Answer with one JSON object: {\"verdict\": \"approve\" | \"revise\", \"issues\": [text], "
    "\"suggested_actions\": [{\"kind\": \"invoke_tool\", \"tool\": name, \"args\": {}}]}.";

json state_summary(const WorkflowState& s) {
  auto columns = json::array();
  for (const auto& c : s.dataset.columns()) {
    columns.push_back({{"name", c.name()}, {"kind", std::string(tabular::to_string(c.kind()))}});
  }
  auto results = json::array();
  for (const auto& r : s.results) {
    const auto level = severity::map_to_level(r.metric_id, r, s.thresholds ? *s.thresholds : severity::ThresholdTable::defaults());
    results.push_back({{"metric_id", r.metric_id}, {"level", level.value}, {"label", std::string(level.label())}});
  }
  auto failures = json::array();
  for (const auto& f : s.failures) failures.push_back({{"metric_id", f.metric_id}, {"error", f.error}});
  auto charts = json::array();
  for (const auto& c : s.charts) charts.push_back(c.file);
  auto recent = json::array();
  const std::size_t from = s.transcript.size() > 8 ? s.transcript.size() - 8 : 0;
  for (std::size_t i = from; i < s.transcript.size(); ++i) {
    recent.push_back({{"role", s.transcript[i].role}, {"content", s.transcript[i].content}});
  }
  json j{{"stage", std::string(to_string(s.stage))},
         {"question", s.task.question},
         {"columns", std::move(columns)},
         {"selected_features", s.features},
         {"cleaned", s.cleaned},
         {"scenario", s.scenario ? json(std::string(metrics::to_string(*s.scenario))) : json()},
         {"results", std::move(results)},
         {"failures", std::move(failures)},
         {"charts", std::move(charts)},
         {"report_revision", s.revision},
         {"report_current", s.report_current},
         {"budget", s.budget},
         {"recent", std::move(recent)}};
  if (s.report) j["headline"] = {{"level", s.report->headline_level}, {"label", s.report->headline_label}};
  return j;
}

json control_tools() {
  const json open_object{{"type", "object"}, {"additionalProperties", true}};
  return json::array({
      {{"type", "function"},
       {"function",
        {{"name", "transition_stage"},
         {"description", "Move the workflow to another stage."},
         {"parameters",
          {{"type", "object"},
           {"properties", {{"stage", {{"type", "string"}}}}},
           {"required", json::array({"stage"})}}}}}},
      {{"type", "function"},
       {"function",
        {{"name", "ask_user"},
         {"description", "Ask the user a question and wait for the reply."},
         {"parameters", {{"type", "object"}, {"properties", {{"prompt", {{"type", "string"}}}}}}}}}},
      {{"type", "function"},
       {"function",
        {{"name", "consult_advisor"},
         {"description", "Ask the advisor to review the plan, the results or the report."},
         {"parameters", open_object}}}},
      {{"type", "function"},
       {"function",
        {{"name", "finish_session"},
         {"description", "End the session."},
         {"parameters", {{"type", "object"}, {"properties", json::object()}}}}}},
  });
}

json tool_schema(const ToolRegistry& reg) {
  auto tools = control_tools();
  for (const auto& t : reg.tools()) {
    tools.push_back({{"type", "function"},
                     {"function",
                      {{"name", t.name},
                       {"description", fmt::format("{} Arguments: {}", t.description, t.signature)},
                       {"parameters", {{"type", "object"}, {"additionalProperties", true}}}}}});
  }
  return tools;
}

// Strips a ```json fence if the model wrapped its answer in one.
std::string unfence(std::string text) {
  const auto open = text.find("```");
  if (open == std::string::npos) return text;
  auto body_start = text.find('\n', open);
  if (body_start == std::string::npos) return text;
  const auto close = text.find("```", body_start);
  return text.substr(body_start + 1, close == std::string::npos ? std::string::npos : close - body_start - 1);
}

json message_of(const json& response) {
  try {
    return response.at("choices").at(0).at("message");
  } catch (const json::exception&) {
    throw Error(Errc::PlannerError, "reply has no choices[0].message");
  }
}

Action from_call(const std::string& name, const json& args, const ToolRegistry& registry) {
  if (name == "transition_stage") return action_from_json({{"kind", "transition"}, {"stage", args.value("stage", "")}});
  if (name == "ask_user") return action_from_json({{"kind", "ask_user"}, {"prompt", args.value("prompt", "Any follow-up?")}});
  if (name == "consult_advisor") return Action{ConsultAdvisor{args}, ""};
  if (name == "finish_session") return Action{Finish{}, ""};
  if (!registry.contains(name)) throw Error(Errc::PlannerError, fmt::format("reply names unknown tool '{}'", name));
  return Action{InvokeTool{name, args}, ""};
}

std::string api_key(const ChatConfig& cfg) {
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw Error(Errc::NetworkError, fmt::format("environment variable {} is not set", cfg.api_key_env));
  }
  return key;
}

}  // namespace

json chat_request(net::HttpClient& client, const ChatConfig& cfg, const json& body) {
  net::HttpRequest req;
  req.url = cfg.base_url + "/chat/completions";
  req.headers = {{"Authorization", "Bearer " + api_key(cfg)}, {"Content-Type", "application/json"}};
  req.body = body.dump();
  req.timeout_s = cfg.timeout_s;
  std::string last;
  const int attempts = std::max(1, cfg.max_attempts);
  for (int i = 0; i < attempts; ++i) {
    if (i > 0 && cfg.backoff_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg.backoff_ms << (i - 1)));
    try {
      const auto res = client.post(req);
      if (res.status >= 200 && res.status < 300) {
        try {
          return json::parse(res.body);
        } catch (const json::exception& e) {
          throw Error(Errc::PlannerError, fmt::format("reply is not JSON: {}", e.what()));
        }
      }
      last = fmt::format("HTTP {}", res.status);
      if (res.status != 429 && res.status < 500) break;
    } catch (const Error& e) {
      if (e.code() != Errc::NetworkError) throw;
      last = e.what();
    }
  }
  throw Error(Errc::NetworkError, fmt::format("chat endpoint failed after {} attempt(s): {}", attempts, last));
}

Action parse_chat_reply(const json& response, const ToolRegistry& registry) {
  const auto msg = message_of(response);
  if (auto calls = msg.find("tool_calls"); calls != msg.end() && calls->is_array() && !calls->empty()) {
    try {
      const auto& fn = calls->at(0).at("function");
      const auto name = fn.at("name").get<std::string>();
      json args = json::object();
      if (auto a = fn.find("arguments"); a != fn.end()) {
        args = a->is_string() ? (a->get<std::string>().empty() ? json::object() : json::parse(a->get<std::string>()))
                              : *a;
      }
      if (args.is_null()) args = json::object();
      if (!args.is_object()) throw Error(Errc::PlannerError, "tool arguments must be an object");
      return from_call(name, args, registry);
    } catch (const json::exception& e) {
      throw Error(Errc::PlannerError, fmt::format("malformed tool call: {}", e.what()));
    }
  }
  const auto content = msg.value("content", std::string());
  json j;
  try {
    j = json::parse(unfence(content));
  } catch (const json::exception&) {
    throw Error(Errc::PlannerError, "reply is neither a tool call nor a JSON action");
  }
  auto a = action_from_json(j);
  if (const auto* t = std::get_if<InvokeTool>(&a.kind); t && !registry.contains(t->tool)) {
    throw Error(Errc::PlannerError, fmt::format("reply names unknown tool '{}'", t->tool));
  }
  return a;
}

ChatPlanner::ChatPlanner(ChatConfig cfg, const ToolRegistry& registry, std::shared_ptr<net::HttpClient> client)
    : cfg_(std::move(cfg)), registry_(registry), client_(client ? std::move(client) : net::default_client()) {}

Action ChatPlanner::next(const WorkflowState& state) {
  json messages = json::array({
      {{"role", "system"}, {"content", kPrimaryPrompt}},
      {{"role", "user"}, {"content", fmt::format("Current state:\n{}\nChoose the next action.", state_summary(state).dump(2))}},
  });
  json body{{"model", cfg_.model}, {"messages", messages}, {"tools", tool_schema(registry_)}, {"temperature", 0}};
  transcript_.push_back(body);
  auto response = chat_request(*client_, cfg_, body);
  transcript_.push_back(response);
  try {
    return parse_chat_reply(response, registry_);
  } catch (const Error& e) {
    if (e.code() != Errc::PlannerError) throw;
    // One reformat round.
    const auto msg = message_of(response);
    body["messages"].push_back({{"role", "assistant"}, {"content", msg.value("content", std::string())}});
    body["messages"].push_back(
        {{"role", "user"},
         {"content", fmt::format("That reply could not be used ({}). Reply with exactly one call to one of the "
                                 "listed tools, or one JSON action object.",
                                 e.what())}});
    transcript_.push_back(body);
    response = chat_request(*client_, cfg_, body);
    transcript_.push_back(response);
    return parse_chat_reply(response, registry_);
  }
}

ChatAdvisor::ChatAdvisor(ChatConfig cfg, std::shared_ptr<net::HttpClient> client)
    : cfg_(std::move(cfg)), client_(client ? std::move(client) : net::default_client()) {}

Critique ChatAdvisor::review(const WorkflowState& state, const json& payload) {
  try {
    json body{{"model", cfg_.model},
              {"temperature", 0},
              {"messages",
               json::array({{{"role", "system"}, {"content", kAdvisorPrompt}},
                            {{"role", "user"},
                             {"content", fmt::format("Review request:\n{}\nState:\n{}", payload.dump(2),
                                                     state_summary(state).dump(2))}}})}};
    const auto j = json::parse(unfence(message_of(chat_request(*client_, cfg_, body)).value("content", std::string())));
    Critique c;
    c.verdict = j.value("verdict", std::string("approve")) == "revise" ? Verdict::Revise : Verdict::Approve;
    for (const auto& i : j.value("issues", json::array())) {
      if (i.is_string()) c.issues.push_back(i.get<std::string>());
    }
    for (const auto& a : j.value("suggested_actions", json::array())) {
      try {
        c.suggested_actions.push_back(action_from_json(a));
      } catch (const Error&) {
        // Unusable suggestions are dropped; the issues still stand.
      }
    }
    if (c.verdict == Verdict::Revise && c.issues.empty()) c.issues.emplace_back("revision requested without reasons");
    return c;
  } catch (const std::exception& e) {
    auto c = fallback_.review(state, payload);
    c.issues.push_back(fmt::format("chat advisor unavailable, checklist review used instead ({})", e.what()));
    return c;
  }
}

}  // namespace biasaudit::orchestrator
