// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "biasaudit/orchestrator.hpp"

namespace biasaudit::orchestrator {

namespace {

constexpr std::array<std::string_view, 5> kStageNames{"user_input", "preprocessing", "detection",
                                                      "visualization_summary", "feedback"};

[[noreturn]] void bad_action(const std::string& why) { throw Error(Errc::PlannerError, why); }

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view to_string(Stage s) noexcept { return kStageNames[static_cast<std::size_t>(s)]; }

std::optional<Stage> stage_from_string(std::string_view s) noexcept {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (kStageNames[i] == s) return static_cast<Stage>(i);
  }
  return std::nullopt;
}

bool legal_transition(Stage from, Stage to) noexcept {
  const int f = static_cast<int>(from), t = static_cast<int>(to);
  return t == f + 1 || t < f;
}

std::vector<std::string> features_in_text(std::string_view text, const std::vector<std::string>& columns) {
  struct Span {
    std::size_t begin, end, column;
  };
  const auto haystack = lower(text);
  std::vector<Span> spans;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto needle = lower(columns[c]);
    if (needle.empty()) continue;
    for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) {
      const auto end = pos + needle.size();
      const bool left_ok = pos == 0 || !word_char(haystack[pos - 1]);
      const bool right_ok = end == haystack.size() || !word_char(haystack[end]);
      if (left_ok && right_ok) spans.push_back({pos, end, c});
    }
  }
  // Longer names win where matches overlap ("education-num" over "education").
  std::stable_sort(spans.begin(), spans.end(),
                   [](const Span& a, const Span& b) { return a.end - a.begin > b.end - b.begin; });
  std::vector<Span> kept;
  std::vector<bool> found(columns.size(), false);
  for (const auto& s : spans) {
    const bool overlaps = std::any_of(kept.begin(), kept.end(),
                                      [&](const Span& k) { return s.begin < k.end && k.begin < s.end; });
    if (overlaps) continue;
    kept.push_back(s);
    found[s.column] = true;
  }
  std::vector<std::string> out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (found[c]) out.push_back(columns[c]);
  }
  return out;
}

nlohmann::json to_json(const Action& a) {
  nlohmann::json j;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, InvokeTool>) {
          j = {{"kind", "invoke_tool"}, {"tool", k.tool}, {"args", k.args}};
        } else if constexpr (std::is_same_v<T, AskUser>) {
          j = {{"kind", "ask_user"}, {"prompt", k.prompt}};
        } else if constexpr (std::is_same_v<T, ConsultAdvisor>) {
          j = {{"kind", "consult_advisor"}, {"payload", k.payload}};
        } else if constexpr (std::is_same_v<T, Transition>) {
          j = {{"kind", "transition"}, {"stage", std::string(to_string(k.to))}};
        } else {
          j = {{"kind", "finish"}};
        }
      },
      a.kind);
  if (!a.rationale.empty()) j["rationale"] = a.rationale;
  return j;
}

Action action_from_json(const nlohmann::json& j) {
  if (!j.is_object()) bad_action("action must be a JSON object");
  const auto kind_it = j.find("kind");
  if (kind_it == j.end() || !kind_it->is_string()) bad_action("action has no \"kind\"");
  const auto kind = kind_it->get<std::string>();
  Action a;
  if (auto r = j.find("rationale"); r != j.end() && r->is_string()) a.rationale = r->get<std::string>();
  if (kind == "invoke_tool") {
    const auto t = j.find("tool");
    if (t == j.end() || !t->is_string()) bad_action("invoke_tool needs a \"tool\" name");
    InvokeTool it{t->get<std::string>(), nlohmann::json::object()};
    if (auto args = j.find("args"); args != j.end()) {
      if (!args->is_object()) bad_action("tool arguments must be an object");
      it.args = *args;
    }
    a.kind = std::move(it);
  } else if (kind == "ask_user") {
    const auto p = j.find("prompt");
    a.kind = AskUser{p != j.end() && p->is_string() ? p->get<std::string>() : std::string("Any follow-up?")};
  } else if (kind == "consult_advisor") {
    const auto p = j.find("payload");
    a.kind = ConsultAdvisor{p != j.end() && p->is_object() ? *p : nlohmann::json::object()};
  } else if (kind == "transition") {
    const auto s = j.find("stage");
    if (s == j.end() || !s->is_string()) bad_action("transition needs a \"stage\"");
    const auto stage = stage_from_string(s->get<std::string>());
    if (!stage) bad_action(fmt::format("unknown stage '{}'", s->get<std::string>()));
    a.kind = Transition{*stage};
  } else if (kind == "finish") {
    a.kind = Finish{};
  } else {
    bad_action(fmt::format("unknown action kind '{}'", kind));
  }
  return a;
}

nlohmann::json to_json(const Critique& c) {
  auto suggested = nlohmann::json::array();
  for (const auto& a : c.suggested_actions) suggested.push_back(to_json(a));
  return {{"verdict", c.verdict == Verdict::Approve ? "approve" : "revise"},
          {"issues", c.issues},
          {"suggested_actions", std::move(suggested)}};
}

bool WorkflowState::has_result(std::string_view metric_id) const {
  return std::any_of(results.begin(), results.end(), [&](const auto& r) { return r.metric_id == metric_id; });
}

bool WorkflowState::has_failure(std::string_view metric_id) const {
  return std::any_of(failures.begin(), failures.end(), [&](const auto& f) { return f.metric_id == metric_id; });
}

std::string ScriptedInput::read(const std::string&) {
  if (next_ >= replies_.size()) throw Error(Errc::EndOfInput, "no scripted reply left");
  return replies_[next_++];
}

std::string StreamInput::read(const std::string& prompt) {
  out_ << prompt << "\n> " << std::flush;
  std::string line;
  while (std::getline(in_, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool blank = std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
    if (!blank) return line;
    out_ << "Please type a reply (or 'quit').\n> " << std::flush;
  }
  throw Error(Errc::EndOfInput, "input stream closed");
}

Message get_user_input(WorkflowState& state, UserInput& input, const std::string& prompt) {
  state.transcript.push_back({"primary", prompt});
  ++state.asks;
  try {
    Message m{"user", input.read(prompt)};
    state.user_replies.push_back(m.content);
    state.transcript.push_back(m);
    return m;
  } catch (const Error& e) {
    if (e.code() == Errc::EndOfInput) state.input_ended = true;
    throw;
  }
}

std::string_view to_string(ToolCategory c) noexcept {
  switch (c) {
    case ToolCategory::Preprocessing: return "preprocessing";
    case ToolCategory::Detection: return "detection";
    case ToolCategory::Visualization: return "visualization";
    case ToolCategory::Misc: return "misc";
  }
  return "misc";
}

void ToolRegistry::add(ToolSpec spec) {
  if (contains(spec.name)) throw Error(Errc::InvalidArgument, fmt::format("tool '{}' registered twice", spec.name));
  tools_.push_back(std::move(spec));
}

const ToolSpec* ToolRegistry::find(std::string_view name) const noexcept {
  for (const auto& t : tools_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

Clock steady_clock_ms() {
  const auto start = std::chrono::steady_clock::now();
  return [start] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
  };
}

Clock frozen_clock() {
  return [] { return std::int64_t{0}; };
}

const LogEvent& SessionLog::append(Stage stage, std::string actor, std::string action, nlohmann::json payload) {
  events_.push_back(LogEvent{events_.size(), stage, std::move(actor), std::move(action), std::move(payload),
                             clock_ ? clock_() : 0});
  return events_.back();
}

std::string SessionLog::to_jsonl() const {
  std::string out;
  for (const auto& e : events_) {
    nlohmann::json j{{"seq", e.seq},       {"stage", std::string(to_string(e.stage))},
                     {"actor", e.actor},   {"action", e.action},
                     {"payload", e.payload}, {"wall_ms", e.wall_ms}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

SessionLog SessionLog::parse(std::string_view jsonl) {
  SessionLog log;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::MalformedLog, fmt::format("line {}: {}", lineno, e.what()));
    }
    try {
      LogEvent e;
      e.seq = j.at("seq").get<std::uint64_t>();
      const auto stage = stage_from_string(j.at("stage").get<std::string>());
      if (!stage) throw Error(Errc::MalformedLog, fmt::format("line {}: unknown stage", lineno));
      e.stage = *stage;
      e.actor = j.at("actor").get<std::string>();
      e.action = j.at("action").get<std::string>();
      e.payload = j.at("payload");
      e.wall_ms = j.at("wall_ms").get<std::int64_t>();
      if (e.seq != log.events_.size()) {
        throw Error(Errc::MalformedLog, fmt::format("line {}: expected seq {}, found {}", lineno, log.events_.size(), e.seq));
      }
      log.events_.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::MalformedLog, fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  return log;
}

SessionLog SessionLog::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::FileNotFound, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

std::string_view to_string(SessionStatus s) noexcept {
  switch (s) {
    case SessionStatus::Finished: return "finished";
    case SessionStatus::BudgetExhausted: return "budget_exhausted";
    case SessionStatus::Aborted: return "aborted";
  }
  return "finished";
}

}  // namespace biasaudit::orchestrator
