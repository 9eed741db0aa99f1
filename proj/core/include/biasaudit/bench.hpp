// SPDX-License-Identifier: Apache-2.0
#pragma once

// Benchmark harness: task sets, the max-rule ground-truth oracle, end-result
// scoring (S_avg, MAE), and process scoring of session logs.

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biasaudit/metrics.hpp"
#include "biasaudit/orchestrator.hpp"
#include "biasaudit/severity.hpp"
#include "biasaudit/tabular.hpp"

namespace biasaudit::bench {

enum class BiasType { Distribution, Correlation, Implication };

/// "Distribution", "Correlation", "Implication".
std::string_view to_string(BiasType t) noexcept;
/// Case-insensitive.
std::optional<BiasType> bias_type_from_string(std::string_view s) noexcept;
/// Implication leaves the bias type to the agent.
metrics::StatedBias stated_bias(BiasType t) noexcept;

struct TaskSpec {
  std::string id;
  std::filesystem::path dataset;
  std::string question;
  BiasType bias_type = BiasType::Distribution;
  std::vector<std::string> features;
  std::string significance;
  std::optional<std::string> mediator;
  std::optional<std::string> covariate;
};

/// Throws SchemaError: missing fields, unknown bias type, or a feature count
/// that does not fit the bias type (Distribution 1, Correlation 2,
/// Implication 1 or 2). Relative dataset paths resolve against `base_dir`.
TaskSpec task_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json task_to_json(const TaskSpec& t);

/// A JSON array of tasks; an empty file is an empty task set.
std::vector<TaskSpec> load_taskset(const std::filesystem::path& path);
void save_taskset(std::span<const TaskSpec> tasks, const std::filesystem::path& path);

orchestrator::TaskContext task_context(const TaskSpec& t);

struct OracleResult {
  metrics::Scenario scenario = metrics::Scenario::CatDist;
  /// Level per metric that produced a value.
  std::map<std::string, int> levels;
  /// Metric id to error text for metrics that raised.
  std::map<std::string, std::string> errors;
  int y = 1;
};

/// Runs the five scenario metrics on the task's features (rows with a
/// missing feature dropped) and takes y as the max level. Throws
/// AllMetricsFailed when no metric produced a level.
OracleResult ground_truth(const TaskSpec& task, const tabular::Table& table, const severity::ThresholdTable& thresholds,
                          const metrics::MetricOptions& options = {});

struct EndResultRecord {
  std::string task_id;
  BiasType bias_type = BiasType::Distribution;
  int x = 1;  // predicted level
  int y = 1;  // ground-truth level
  std::map<std::string, int> oracle_levels;
};

struct EndResultScore {
  double s_avg = 0;  // percent
  double mae = 0;
  std::size_t n = 0;
};

/// S_avg = mean(1 - |x - y| / 4) * 100, MAE = mean |x - y|.
/// Errors: EmptyRecords; InvalidArgument for levels outside 1..5.
EndResultScore score_end_results(std::span<const EndResultRecord> records);

enum class Dimension { Communication, Planning, Tooling, Adaptivity, Summarization, Integration };
inline constexpr std::array kAllDimensions{Dimension::Communication, Dimension::Planning,      Dimension::Tooling,
                                           Dimension::Adaptivity,    Dimension::Summarization, Dimension::Integration};
std::string_view to_string(Dimension d) noexcept;

enum class Rating { Excellent, Proficient, Adequate, Mediocre, Unsatisfactory };
std::string_view to_string(Rating r) noexcept;
/// >=90 Excellent, >=75 Proficient, >=60 Adequate, >=40 Mediocre, else Unsatisfactory.
Rating rating_for(double score) noexcept;

struct DimensionScore {
  double score = 0;
  Rating rating = Rating::Unsatisfactory;
  std::string evidence;
};

struct ProcessScores {
  std::array<DimensionScore, 6> dims{};
  const DimensionScore& at(Dimension d) const { return dims[static_cast<std::size_t>(d)]; }
  DimensionScore& at(Dimension d) { return dims[static_cast<std::size_t>(d)]; }
};

nlohmann::json to_json(const ProcessScores& p);

class Judge {
 public:
  virtual ~Judge() = default;
  virtual ProcessScores score(const orchestrator::SessionLog& log) = 0;
};

/// Scores from the structure of the log alone:
///  Communication  40 question recorded, +35 plan names features and
///                 scenario, +25 the user was asked and answered.
///  Planning       20 explicit plan, +60 x (scenario metrics in the plan)/5,
///                 +20 cleaning scheduled before detection.
///  Tooling        20 without any invocation, otherwise
///                 100 x (0.6 x min(distinct tools, 7)/7 + 0.4 x (1 - error rate)).
///  Adaptivity     85 without tool errors, otherwise 40 + 60 x recovered share;
///                 an error is recovered by a later call of the same tool or
///                 a later advisor consultation.
///  Summarization  20 per report property: findings, level labels, headline,
///                 charts, recommendations.
///  Integration    50 when every transition is legal and no action was
///                 rejected, +50 when the session ended with a complete report.
class HeuristicJudge final : public Judge {
 public:
  ProcessScores score(const orchestrator::SessionLog& log) override;
};

/// Sends the rubric and the log to a chat endpoint and expects
/// {"<dimension>": {"score": number, "evidence": text}, ...}.
class ChatJudge final : public Judge {
 public:
  explicit ChatJudge(orchestrator::ChatConfig cfg, std::shared_ptr<net::HttpClient> client = nullptr);
  ProcessScores score(const orchestrator::SessionLog& log) override;

 private:
  orchestrator::ChatConfig cfg_;
  std::shared_ptr<net::HttpClient> client_;
};

/// Checks the log has a start and an end event (MalformedLog otherwise),
/// then delegates to the judge.
ProcessScores score_process(const orchestrator::SessionLog& log, Judge& judge);
std::string render_process_report(const std::string& task_id, const ProcessScores& scores);

using PlannerFactory = std::function<std::unique_ptr<orchestrator::Planner>()>;
using AdvisorFactory = std::function<std::unique_ptr<orchestrator::Advisor>()>;

struct BenchmarkOptions {
  PlannerFactory planner;  // RulePlanner when empty
  AdvisorFactory advisor;  // RuleAdvisor when empty
  std::shared_ptr<const severity::ThresholdTable> thresholds;
  std::shared_ptr<const methodlib::Library> library;
  int budget = 64;
  unsigned jobs = 1;
  /// HeuristicJudge when null. Must be safe to call from several threads
  /// when jobs > 1.
  Judge* judge = nullptr;
  std::function<orchestrator::Clock()> clock;  // frozen clock when empty
};

struct TaskOutcome {
  TaskSpec task;
  std::optional<EndResultRecord> record;
  std::optional<ProcessScores> process;
  std::optional<orchestrator::SessionResult> session;
  std::string error;
};

struct TypeRow {
  std::string label;  // a bias type name or "Overall"
  std::size_t n = 0;
  std::optional<EndResultScore> score;
};

struct BenchmarkReport {
  std::vector<TaskOutcome> outcomes;
  /// Distribution, Correlation, Implication, Overall.
  std::vector<TypeRow> rows;
  /// Mean score per dimension over tasks with process scores.
  std::array<double, 6> process_means{};
  std::size_t failed() const;
};

/// Runs every task (concurrently with jobs > 1), scores the headline level
/// against the oracle and the log with the judge. A failing task is listed,
/// never fatal. Throws EmptyRecords for an empty task set.
BenchmarkReport run_benchmark(std::span<const TaskSpec> tasks, const orchestrator::ToolRegistry& registry,
                              const BenchmarkOptions& options = {});

std::string render_benchmark_markdown(const BenchmarkReport& r);
nlohmann::json benchmark_json(const BenchmarkReport& r);
/// Writes benchmark.md, results.json and <task id>/{report.md, findings.json,
/// charts, logs/session.jsonl, process.md}.
void write_benchmark(const BenchmarkReport& r, const std::filesystem::path& dir);

}  // namespace biasaudit::bench
