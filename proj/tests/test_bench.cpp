// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "biasaudit/bench.hpp"
#include "biasaudit/synthgen.hpp"

namespace {

using namespace biasaudit;
using namespace biasaudit::bench;
using metrics::Scenario;

const std::filesystem::path kFixtures = BIASAUDIT_FIXTURES;
const std::filesystem::path kData = BIASAUDIT_DATA;

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

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One task per (scenario, level), each on its own generated CSV. Every third
// task is posed as an implication question.
std::vector<TaskSpec> synthetic_taskset(const std::filesystem::path& dir, std::size_t n = 1500) {
  std::filesystem::create_directories(dir);
  std::vector<TaskSpec> tasks;
  for (int s = 0; s < 5; ++s) {
    const auto scenario = static_cast<Scenario>(s);
    for (int level = 1; level <= 5; ++level) {
      synthgen::SynthSpec spec{scenario, n, 3, synthgen::strength_for_level(level),
                               static_cast<std::uint64_t>(100 + tasks.size())};
      TaskSpec t;
      t.id = std::string(metrics::to_string(scenario)) + "-" + std::to_string(level);
      t.dataset = dir / (t.id + ".csv");
      tabular::write_table(synthgen::generate(spec), t.dataset);
      t.features = synthgen::feature_columns(scenario);
      t.question = "Check the data for bias.";
      t.bias_type = tasks.size() % 3 == 2       ? BiasType::Implication
                    : metrics::is_distribution(scenario) ? BiasType::Distribution
                                                         : BiasType::Correlation;
      if (scenario == Scenario::CatNum) t.mediator = "mediator";
      tasks.push_back(std::move(t));
    }
  }
  return tasks;
}

const BenchmarkReport& synthetic_report() {
  static const BenchmarkReport report = [] {
    const auto tasks = synthetic_taskset(std::filesystem::temp_directory_path() / "biasaudit_bench_synth");
    BenchmarkOptions o;
    o.jobs = 2;
    return run_benchmark(tasks, orchestrator::builtin_registry(), o);
  }();
  return report;
}

TEST(TaskSet, ParsesAndValidates) {
  const nlohmann::json row{{"id", "T1"},
                           {"dataset", "adult.csv"},
                           {"question", "Can you check if the age distribution across individuals is balanced?"},
                           {"bias_type", "Distribution"},
                           {"features", {"age"}}};
  const auto t = task_from_json(row, "/data");
  EXPECT_EQ(t.bias_type, BiasType::Distribution);
  EXPECT_EQ(t.features, std::vector<std::string>{"age"});
  EXPECT_EQ(t.dataset, std::filesystem::path("/data/adult.csv"));

  auto bad = row;
  bad["bias_type"] = "Correlation";
  EXPECT_EQ(code_of([&] { task_from_json(bad); }), Errc::SchemaError);
  bad["bias_type"] = "Vibes";
  EXPECT_EQ(code_of([&] { task_from_json(bad); }), Errc::SchemaError);
  auto implication = row;
  implication["bias_type"] = "Implication";
  implication["features"] = {"age", "sex", "race"};
  EXPECT_EQ(code_of([&] { task_from_json(implication); }), Errc::SchemaError);
  auto missing = row;
  missing.erase("question");
  EXPECT_EQ(code_of([&] { task_from_json(missing); }), Errc::SchemaError);
}

TEST(TaskSet, FilesRoundTrip) {
  const auto empty = std::filesystem::temp_directory_path() / "biasaudit_empty_taskset.json";
  std::ofstream(empty) << "";
  EXPECT_TRUE(load_taskset(empty).empty());

  const auto tasks = load_taskset(kData / "sample_taskset.json");
  EXPECT_EQ(tasks.size(), 12u);
  const auto path = std::filesystem::temp_directory_path() / "biasaudit_taskset_copy.json";
  save_taskset(tasks, path);
  const auto again = load_taskset(path);
  ASSERT_EQ(again.size(), tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    EXPECT_EQ(task_to_json(again[i]), task_to_json(tasks[i]));
  }
}

TEST(Oracle, NullAndStrongSyntheticTables) {
  const auto& th = severity::ThresholdTable::defaults();
  TaskSpec uniform;
  uniform.bias_type = BiasType::Distribution;
  uniform.features = {"category"};
  const auto u = ground_truth(uniform, synthgen::generate({Scenario::CatDist, 20000, 4, 0.0, 3}), th);
  EXPECT_EQ(u.scenario, Scenario::CatDist);
  EXPECT_EQ(u.y, 1);
  for (const auto& [id, level] : u.levels) EXPECT_EQ(level, 1) << id;

  TaskSpec strong;
  strong.bias_type = BiasType::Correlation;
  strong.features = {"group", "outcome"};
  strong.mediator = "mediator";
  const auto s = ground_truth(strong, synthgen::generate({Scenario::CatNum, 5000, 2, 0.95, 3}), th);
  EXPECT_EQ(s.y, 5);
  EXPECT_EQ(s.levels.size(), 5u);
}

TEST(Oracle, HeadlineIsTheMaximum) {
  const auto& th = severity::ThresholdTable::defaults();
  TaskSpec t;
  t.bias_type = BiasType::Correlation;
  t.features = {"x", "y"};
  const auto r = ground_truth(t, synthgen::generate({Scenario::NumNum, 3000, 2, 0.45, 8}), th);
  int mx = 0;
  for (const auto& [id, level] : r.levels) mx = std::max(mx, level);
  EXPECT_EQ(r.y, mx);
}

TEST(EndResults, Formula) {
  const std::vector<EndResultRecord> two{{"a", BiasType::Distribution, 3, 3, {}},
                                         {"b", BiasType::Distribution, 2, 4, {}}};
  const auto s = score_end_results(two);
  EXPECT_DOUBLE_EQ(s.s_avg, 75.0);
  EXPECT_DOUBLE_EQ(s.mae, 1.0);
  const std::vector<EndResultRecord> far{{"a", BiasType::Correlation, 1, 5, {}}};
  EXPECT_DOUBLE_EQ(score_end_results(far).s_avg, 0.0);
  EXPECT_EQ(code_of([] { score_end_results({}); }), Errc::EmptyRecords);
  const std::vector<EndResultRecord> bad{{"a", BiasType::Correlation, 0, 5, {}}};
  EXPECT_EQ(code_of([&] { score_end_results(bad); }), Errc::InvalidArgument);
}

TEST(EndResults, SavgIsHundredMinusTwentyFiveMae) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EndResultRecord> recs(1 + rng() % 20);
    for (auto& r : recs) {
      r.x = 1 + static_cast<int>(rng() % 5);
      r.y = 1 + static_cast<int>(rng() % 5);
    }
    const auto s = score_end_results(recs);
    EXPECT_NEAR(s.s_avg, 100 - 25 * s.mae, 1e-9);
    EXPECT_GE(s.s_avg, 0.0);
    EXPECT_LE(s.s_avg, 100.0);
  }
}

TEST(Ratings, Bands) {
  EXPECT_EQ(rating_for(90), Rating::Excellent);
  EXPECT_EQ(rating_for(89.9), Rating::Proficient);
  EXPECT_EQ(rating_for(75), Rating::Proficient);
  EXPECT_EQ(rating_for(60), Rating::Adequate);
  EXPECT_EQ(rating_for(40), Rating::Mediocre);
  EXPECT_EQ(rating_for(39.9), Rating::Unsatisfactory);
}

TEST(Process, SessionWithoutToolsScoresLowOnTooling) {
  HeuristicJudge judge;
  const auto log = orchestrator::SessionLog::load(kFixtures / "no_tool_session.jsonl");
  const auto p = score_process(log, judge);
  EXPECT_LE(p.at(Dimension::Tooling).score, 40.0);
  EXPECT_GE(p.at(Dimension::Tooling).rating, Rating::Mediocre);
  EXPECT_FALSE(p.at(Dimension::Tooling).evidence.empty());
}

TEST(Process, CleanRuleSessionScoresWellEverywhere) {
  orchestrator::RulePlanner planner;
  orchestrator::TaskContext ctx;
  ctx.dataset = kData / "sample.csv";
  ctx.features = {"gender"};
  ctx.question = "Is gender balanced?";
  const auto res = orchestrator::run_session(ctx, planner, orchestrator::builtin_registry());
  HeuristicJudge judge;
  const auto p = score_process(res.log, judge);
  for (auto d : kAllDimensions) EXPECT_GE(p.at(d).score, 75.0) << to_string(d);
  const auto md = render_process_report("t", p);
  for (auto d : kAllDimensions) EXPECT_NE(md.find(std::string(to_string(d))), std::string::npos);
}

TEST(Process, TruncatedLogIsMalformed) {
  HeuristicJudge judge;
  const auto text = slurp(kFixtures / "no_tool_session.jsonl");
  const auto cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);  // drop the end event
  EXPECT_EQ(code_of([&] { score_process(orchestrator::SessionLog::parse(cut), judge); }), Errc::MalformedLog);
  EXPECT_EQ(code_of([&] { score_process(orchestrator::SessionLog{}, judge); }), Errc::MalformedLog);
}

class ScriptedJudgeClient : public net::HttpClient {
 public:
  net::HttpResponse post(const net::HttpRequest&) override {
    nlohmann::json scores = nlohmann::json::object();
    for (auto d : kAllDimensions) scores[std::string(to_string(d))] = {{"score", 80}, {"evidence", "ok"}};
    const nlohmann::json msg{{"role", "assistant"}, {"content", scores.dump()}};
    return {200, nlohmann::json{{"choices", nlohmann::json::array({{{"message", msg}}})}}.dump()};
  }
};

TEST(Process, ChatJudgeReadsRubricScores) {
  ::setenv("BIASAUDIT_TEST_JUDGE_KEY", "k", 1);
  orchestrator::ChatConfig cfg;
  cfg.api_key_env = "BIASAUDIT_TEST_JUDGE_KEY";
  cfg.backoff_ms = 0;
  ChatJudge judge(cfg, std::make_shared<ScriptedJudgeClient>());
  const auto p = score_process(orchestrator::SessionLog::load(kFixtures / "no_tool_session.jsonl"), judge);
  for (auto d : kAllDimensions) {
    EXPECT_DOUBLE_EQ(p.at(d).score, 80.0);
    EXPECT_EQ(p.at(d).rating, Rating::Proficient);
  }
}

TEST(Benchmark, SelfConsistencyOnSyntheticTaskset) {
  const auto& r = synthetic_report();
  EXPECT_EQ(r.failed(), 0u);
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.rows[0].label, "Distribution");
  EXPECT_EQ(r.rows[3].label, "Overall");
  EXPECT_EQ(r.rows[3].n, 25u);
  EXPECT_EQ(r.rows[0].n + r.rows[1].n + r.rows[2].n, 25u);
  for (const auto& row : r.rows) {
    ASSERT_TRUE(row.score.has_value()) << row.label;
    EXPECT_DOUBLE_EQ(row.score->s_avg, 100.0) << row.label;
  }
}

TEST(Benchmark, PerturbingKPredictionsCostsTwentyFivePointsEach) {
  const auto& r = synthetic_report();
  std::vector<EndResultRecord> recs;
  for (const auto& o : r.outcomes) recs.push_back(*o.record);
  const double n = static_cast<double>(recs.size());
  for (std::size_t k = 0; k <= recs.size(); k += 4) {
    auto moved = recs;
    for (std::size_t i = 0; i < k; ++i) moved[i].x += moved[i].x == 5 ? -1 : 1;
    EXPECT_NEAR(score_end_results(moved).s_avg, 100.0 - 25.0 * static_cast<double>(k) / n, 1e-9) << k;
  }
}

TEST(Benchmark, FailingTaskIsListedAndOthersScored) {
  auto tasks = load_taskset(kData / "sample_taskset.json");
  tasks.resize(3);
  tasks[1].dataset = "/nonexistent/missing.csv";
  const auto r = run_benchmark(tasks, orchestrator::builtin_registry());
  EXPECT_EQ(r.failed(), 1u);
  EXPECT_EQ(r.rows.back().n, 2u);
  EXPECT_FALSE(r.outcomes[1].error.empty());
  const auto md = render_benchmark_markdown(r);
  EXPECT_NE(md.find("# Benchmark results"), std::string::npos);
  EXPECT_NE(md.find("| Overall | 2 |"), std::string::npos);
  EXPECT_EQ(benchmark_json(r).at("failed"), 1);
  EXPECT_EQ(code_of([] { run_benchmark({}, orchestrator::builtin_registry()); }), Errc::EmptyRecords);
}

TEST(Benchmark, OutputIsDeterministic) {
  auto tasks = load_taskset(kData / "sample_taskset.json");
  tasks.resize(4);
  const auto a = std::filesystem::temp_directory_path() / "biasaudit_bench_a";
  const auto b = std::filesystem::temp_directory_path() / "biasaudit_bench_b";
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
  BenchmarkOptions two;
  two.jobs = 2;
  write_benchmark(run_benchmark(tasks, orchestrator::builtin_registry()), a);
  write_benchmark(run_benchmark(tasks, orchestrator::builtin_registry(), two), b);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = std::filesystem::relative(e.path(), a);
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
  }
  EXPECT_GT(files, 4u);
}

}  // namespace
