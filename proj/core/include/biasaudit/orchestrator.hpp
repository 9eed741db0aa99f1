// SPDX-License-Identifier: Apache-2.0
#pragma once

// The five-stage detection workflow as a state machine. A Planner (the
// primary role) proposes one Action at a time; an Advisor reviews the plan,
// the detection results and the report; tools are the only way to touch data.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "biasaudit/error.hpp"
#include "biasaudit/methodlib.hpp"
#include "biasaudit/metrics.hpp"
#include "biasaudit/net.hpp"
#include "biasaudit/reporting.hpp"
#include "biasaudit/severity.hpp"
#include "biasaudit/tabular.hpp"

namespace biasaudit::orchestrator {

enum class Stage { UserInput, Preprocessing, Detection, VisualizationSummary, Feedback };

/// "user_input", "preprocessing", "detection", "visualization_summary", "feedback".
std::string_view to_string(Stage s) noexcept;
std::optional<Stage> stage_from_string(std::string_view s) noexcept;

/// One step forward along the workflow, or back to any earlier stage.
bool legal_transition(Stage from, Stage to) noexcept;

enum class Mode { Batch, Interactive };

struct TaskContext {
  std::string id = "task";
  std::filesystem::path dataset;
  std::string question;
  /// Empty: feature names are looked up in the question text.
  std::vector<std::string> features;
  metrics::StatedBias stated = metrics::StatedBias::Unstated;
  /// Optional columns handed to the CatNum metrics that use them.
  std::optional<std::string> mediator;
  std::optional<std::string> covariate;
  Mode mode = Mode::Batch;
  /// Replies returned by get_user_input in batch mode.
  std::vector<std::string> follow_ups;
  tabular::CsvOptions csv;
  metrics::MetricOptions metric_options;
};

/// Column names mentioned in `text` as whole words (case-insensitive),
/// in table order.
std::vector<std::string> features_in_text(std::string_view text, const std::vector<std::string>& columns);

struct InvokeTool {
  std::string tool;
  nlohmann::json args = nlohmann::json::object();
};
struct AskUser {
  std::string prompt;
};
struct ConsultAdvisor {
  nlohmann::json payload = nlohmann::json::object();
};
struct Transition {
  Stage to = Stage::UserInput;
};
struct Finish {};

struct Action {
  std::variant<InvokeTool, AskUser, ConsultAdvisor, Transition, Finish> kind;
  std::string rationale;
};

/// {"kind": "invoke_tool"|"ask_user"|"consult_advisor"|"transition"|"finish", ...}
nlohmann::json to_json(const Action& a);
/// Throws PlannerError on anything that is not a well-formed action.
Action action_from_json(const nlohmann::json& j);

enum class Verdict { Approve, Revise };

struct Critique {
  Verdict verdict = Verdict::Approve;
  std::vector<std::string> issues;
  std::vector<Action> suggested_actions;
};

nlohmann::json to_json(const Critique& c);

struct Message {
  std::string role;  // "user", "primary", "advisor", "tool"
  std::string content;
};

struct ChartArtifact {
  std::string file;  // e.g. "bar_gender.svg"
  reporting::ChartKind kind = reporting::ChartKind::Bar;
  std::string svg;
};

class UserInput;

/// Everything a planner may look at. Tools mutate it; planners only read it.
struct WorkflowState {
  Stage stage = Stage::UserInput;
  TaskContext task;
  int budget = 64;

  tabular::Table dataset;
  std::optional<tabular::Table> working;
  std::vector<std::string> features;
  bool cleaned = false;
  std::optional<metrics::Scenario> scenario;
  std::vector<metrics::MetricResult> results;
  std::vector<reporting::FailedMetric> failures;
  std::vector<ChartArtifact> charts;
  std::vector<std::string> method_ids;
  std::optional<reporting::ReportDocument> report;
  std::vector<std::string> notes;

  /// Invocation count per tool since the last extraction.
  std::map<std::string, int> attempts;
  std::vector<Message> transcript;
  std::vector<std::string> user_replies;
  bool input_ended = false;
  std::size_t asks = 0;
  /// Snapshots taken when the last report was generated.
  std::size_t replies_at_report = 0;
  std::size_t asks_at_report = 0;
  int revision = 0;
  /// False once anything the report depends on changed after it was built.
  bool report_current = false;

  bool plan_reviewed = false;
  bool results_reviewed = false;
  bool report_reviewed = false;
  std::vector<Action> suggestions;

  std::shared_ptr<const severity::ThresholdTable> thresholds;
  std::shared_ptr<const methodlib::Library> library;
  /// Not owned; null means there is nobody to ask.
  UserInput* input = nullptr;

  bool has_result(std::string_view metric_id) const;
  bool has_failure(std::string_view metric_id) const;
};

/// Source of user replies. read() throws EndOfInput when none is left.
class UserInput {
 public:
  virtual ~UserInput() = default;
  virtual std::string read(const std::string& prompt) = 0;
};

class ScriptedInput final : public UserInput {
 public:
  explicit ScriptedInput(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string read(const std::string& prompt) override;

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

/// Prompts on `out` and reads lines from `in`; empty lines are rejected with
/// a re-prompt.
class StreamInput final : public UserInput {
 public:
  StreamInput(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  std::string read(const std::string& prompt) override;

 private:
  std::istream& in_;
  std::ostream& out_;
};

/// get_user_input: reads one reply and records it in the transcript.
/// Throws EndOfInput.
Message get_user_input(WorkflowState& state, UserInput& input, const std::string& prompt);

using ToolFn = std::function<nlohmann::json(WorkflowState&, const nlohmann::json& args)>;

enum class ToolCategory { Preprocessing, Detection, Visualization, Misc };
std::string_view to_string(ToolCategory c) noexcept;

struct ToolSpec {
  std::string name;
  std::string signature;  // JSON-ish argument summary shown to planners
  std::string description;
  ToolCategory category = ToolCategory::Misc;
  ToolFn run;
};

class ToolRegistry {
 public:
  /// Throws InvalidArgument on a duplicate name.
  void add(ToolSpec spec);
  const ToolSpec* find(std::string_view name) const noexcept;
  bool contains(std::string_view name) const noexcept { return find(name) != nullptr; }
  const std::vector<ToolSpec>& tools() const noexcept { return tools_; }
  std::size_t size() const noexcept { return tools_.size(); }

 private:
  std::vector<ToolSpec> tools_;
};

/// The 45 built-in tools: 7 preprocessing, 25 detection, 9 visualization,
/// 4 misc.
ToolRegistry builtin_registry();

class Planner {
 public:
  virtual ~Planner() = default;
  virtual Action next(const WorkflowState& state) = 0;
  virtual std::string_view name() const noexcept = 0;
};

/// Deterministic policy: extract and clean the features, run the scenario's
/// five metrics (each failed metric is retried once), draw the scenario's
/// default chart, generate the report, consult the advisor after planning,
/// after detection and before finishing.
class RulePlanner final : public Planner {
 public:
  Action next(const WorkflowState& state) override;
  std::string_view name() const noexcept override { return "rule"; }
};

/// Replays a fixed action list, then finishes.
class ScriptedPlanner final : public Planner {
 public:
  explicit ScriptedPlanner(std::vector<Action> script) : script_(std::move(script)) {}
  Action next(const WorkflowState& state) override;
  std::string_view name() const noexcept override { return "scripted"; }

 private:
  std::vector<Action> script_;
  std::size_t next_ = 0;
};

/// The tool sequence RulePlanner runs for a scenario when nothing fails:
/// extraction, cleaning, five metrics, one chart, the report.
std::vector<std::string> planned_tools(metrics::Scenario s, std::size_t feature_count);

/// The full action list of an error-free RulePlanner batch session.
std::vector<Action> canonical_script(metrics::Scenario s, const std::vector<std::string>& features);

class Advisor {
 public:
  virtual ~Advisor() = default;
  /// payload["point"] is "plan", "results" or "report".
  virtual Critique review(const WorkflowState& state, const nlohmann::json& payload) = 0;
};

/// Checklist review: every scenario metric scheduled and cleaning before
/// detection (plan); every metric has a result or was retried after failing
/// (results); findings carry level labels and recommendations (report).
class RuleAdvisor final : public Advisor {
 public:
  Critique review(const WorkflowState& state, const nlohmann::json& payload) override;
};

struct ChatConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o";
  /// Name of the environment variable holding the API key.
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_s = 60;
  int max_attempts = 3;
  int backoff_ms = 500;
};

/// Chat-completion call with retry and exponential backoff on NetworkError
/// and non-2xx replies. Returns the parsed response body.
nlohmann::json chat_request(net::HttpClient& client, const ChatConfig& cfg, const nlohmann::json& body);

/// Maps a chat-completion reply to an Action: a tool call, or a JSON action
/// object in the message content. Throws PlannerError.
Action parse_chat_reply(const nlohmann::json& response, const ToolRegistry& registry);

class ChatPlanner final : public Planner {
 public:
  ChatPlanner(ChatConfig cfg, const ToolRegistry& registry, std::shared_ptr<net::HttpClient> client = nullptr);
  Action next(const WorkflowState& state) override;
  std::string_view name() const noexcept override { return "chat"; }
  /// Request and response bodies, in order.
  const std::vector<nlohmann::json>& transcript() const noexcept { return transcript_; }

 private:
  ChatConfig cfg_;
  const ToolRegistry& registry_;
  std::shared_ptr<net::HttpClient> client_;
  std::vector<nlohmann::json> transcript_;
};

/// Falls back to the rule checklist when the endpoint fails or replies with
/// something unparseable, and says so in the issues.
class ChatAdvisor final : public Advisor {
 public:
  explicit ChatAdvisor(ChatConfig cfg, std::shared_ptr<net::HttpClient> client = nullptr);
  Critique review(const WorkflowState& state, const nlohmann::json& payload) override;

 private:
  ChatConfig cfg_;
  std::shared_ptr<net::HttpClient> client_;
  RuleAdvisor fallback_;
};

struct LogEvent {
  std::uint64_t seq = 0;
  Stage stage = Stage::UserInput;
  std::string actor;   // "system", "primary", "advisor", "tool", "user"
  std::string action;  // e.g. "invoke_tool", "tool_result", "critique"
  nlohmann::json payload;
  std::int64_t wall_ms = 0;
};

using Clock = std::function<std::int64_t()>;
/// Milliseconds since construction, from a steady clock.
Clock steady_clock_ms();
/// Always 0; gives byte-stable logs.
Clock frozen_clock();

class SessionLog {
 public:
  explicit SessionLog(Clock clock = frozen_clock()) : clock_(std::move(clock)) {}
  const LogEvent& append(Stage stage, std::string actor, std::string action, nlohmann::json payload);
  const std::vector<LogEvent>& events() const noexcept { return events_; }
  /// One JSON object per line with keys seq, stage, actor, action, payload, wall_ms.
  std::string to_jsonl() const;
  /// Throws MalformedLog on bad JSON, missing fields, or a broken seq run.
  static SessionLog parse(std::string_view jsonl);
  static SessionLog load(const std::filesystem::path& path);

 private:
  Clock clock_;
  std::vector<LogEvent> events_;
};

enum class SessionStatus { Finished, BudgetExhausted, Aborted };
std::string_view to_string(SessionStatus s) noexcept;

struct SessionOptions {
  int budget = 64;
  std::shared_ptr<const severity::ThresholdTable> thresholds;
  std::shared_ptr<const methodlib::Library> library;
  Advisor* advisor = nullptr;
  UserInput* input = nullptr;
  Clock clock = frozen_clock();
};

struct SessionResult {
  reporting::ReportDocument report;
  SessionLog log;
  std::vector<ChartArtifact> charts;
  SessionStatus status = SessionStatus::Finished;
  /// Set when status is Aborted.
  std::optional<Errc> error;
  std::string error_message;
};

/// Loads the dataset, then loops planner -> action -> effect until Finish or
/// the budget runs out. An illegal action is logged and the planner is asked
/// once more; a second illegal action aborts with PlannerError. Tool errors
/// are recorded in the state and left to the planner. Without Finish the
/// report is flagged incomplete. Throws only when the dataset cannot be read.
SessionResult run_session(TaskContext task, Planner& planner, const ToolRegistry& registry, SessionOptions opts = {});

/// Writes report.md, findings.json, the charts, and logs/session.jsonl.
void write_session(const SessionResult& r, const std::filesystem::path& dir);

}  // namespace biasaudit::orchestrator
