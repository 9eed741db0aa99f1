// SPDX-License-Identifier: Apache-2.0
// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 when any
// line fails. Every criterion runs with a network-refusing client installed.

#include <fmt/core.h>
#include <fmt/ranges.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>

#include "biasaudit/bench.hpp"
#include "biasaudit/net.hpp"
#include "biasaudit/synthgen.hpp"
#include "invariance.hpp"
#include "oracle.hpp"
#ifdef BIASAUDIT_HAVE_CLI
#include "cli.hpp"
#endif

namespace {

namespace fs = std::filesystem;
using namespace biasaudit;
using metrics::Scenario;
using Clock = std::chrono::steady_clock;

const fs::path kData = BIASAUDIT_DATA;
const fs::path kFixtures = BIASAUDIT_FIXTURES;

// Pinned tolerances and limits.
constexpr double kOracleTol = 1e-9;
constexpr std::size_t kOracleInstances = 20;
constexpr double kOracleSeconds = 10.0;
constexpr double kAnchorTol = 1e-6;
constexpr double kCalibrationAccuracy = 0.90;
constexpr double kCalibrationSeconds = 300.0;
constexpr double kPerturbTol = 1e-9;
constexpr std::size_t kInvarianceTrials = 1000;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict oracle_suite() {
  const auto t0 = Clock::now();
  const auto stats = oracle::run_suite(kOracleInstances, 20240611, kOracleTol);
  const double secs = seconds_since(t0);
  std::size_t min_compared = SIZE_MAX;
  double worst = 0;
  std::string bad;
  for (const auto& s : stats) {
    min_compared = std::min(min_compared, s.compared);
    worst = std::max(worst, s.max_err);
    if (s.compared < kOracleInstances || s.disagreements > 0 || s.max_err > kOracleTol) {
      if (bad.empty()) bad = s.metric_id + (s.first_failure.empty() ? "" : ": " + s.first_failure);
    }
  }
  const bool ok = stats.size() == 25 && bad.empty() && secs < kOracleSeconds;
  return {ok, fmt::format("{} metrics, >= {} instances each, max err {:.2e}, {:.2f} s{}", stats.size(), min_compared,
                          worst, secs, bad.empty() ? "" : "; first failure " + bad)};
}

Verdict anchors() {
  const std::vector<double> uniform{25, 25, 25, 25};
  const double balance = metrics::cat_dist_from_counts(uniform, "shannon_balance").at("balance");
  const double v = metrics::cat_cat_from_table({{30, 10}, {10, 30}}, "cramers_v").at("V");
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
  const double r = metrics::num_num_from_values(x, y, "pearson").at("r");
  const double z = metrics::cat_cat_from_table({{70, 30}, {50, 50}}, "statistical_parity").at("z_max");
  const std::vector<bench::EndResultRecord> recs{{"a", bench::BiasType::Distribution, 3, 3, {}},
                                                 {"b", bench::BiasType::Distribution, 2, 4, {}}};
  const double s_avg = bench::score_end_results(recs).s_avg;
  // The parity example is quoted to three decimals; the exact value is 0.2 / sqrt(0.24 * 0.02).
  const double z_exact = 0.2 / std::sqrt(0.24 * 0.02);
  const bool ok = std::abs(balance - 1) <= kAnchorTol && std::abs(v - 0.5) <= kAnchorTol &&
                  std::abs(r - 0.8) <= kAnchorTol && std::abs(z - z_exact) <= kAnchorTol &&
                  std::abs(z - 2.887) <= 5e-4 && std::abs(s_avg - 75) <= kAnchorTol;
  return {ok, fmt::format("balance={:.9f} V={:.9f} r={:.9f} z={:.6f} S_avg={:.6f}", balance, v, r, z, s_avg)};
}

Verdict ratio_thresholds() {
  const auto& th = severity::ThresholdTable::defaults();
  const auto level = [&](double ratio) {
    metrics::MetricResult m;
    m.metric_id = "max_min_ratio";
    m.raw = {{"ratio", ratio}};
    return severity::map_to_level("max_min_ratio", m, th).value;
  };
  bool ok = true;
  for (double v : {100.5, 101.0, 1e3, 1e9, std::numeric_limits<double>::infinity()}) ok &= level(v) == 5;
  for (double v : {10.0001, 11.0, 50.0, 99.99, 100.0}) ok &= level(v) == 4;
  ok &= level(10.0) < 4;
  return {ok, fmt::format("101 -> {}, 100 -> {}, 50 -> {}, 10 -> {}", level(101), level(100), level(50), level(10))};
}

Verdict calibration() {
  const auto t0 = Clock::now();
  std::vector<synthgen::SuiteCase> suite;
  const std::vector<int> levels{1, 2, 3, 4, 5};
  for (auto s : {Scenario::CatDist, Scenario::NumDist, Scenario::CatCat, Scenario::CatNum, Scenario::NumNum}) {
    const auto cases = synthgen::grade_suite(s, levels);
    suite.insert(suite.end(), cases.begin(), cases.end());
  }
  const unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  const auto rep = severity::calibrate(suite, severity::ThresholdTable::defaults(), jobs);
  const double secs = seconds_since(t0);
  const bool ok = rep.accuracy_after >= kCalibrationAccuracy && rep.headline_accuracy_after >= kCalibrationAccuracy &&
                  secs < kCalibrationSeconds;
  return {ok, fmt::format("{} cases; per-metric {:.3f} -> {:.3f}; headline {:.3f} -> {:.3f}; {} inseparable; {:.1f} s",
                          suite.size(), rep.accuracy_before, rep.accuracy_after, rep.headline_accuracy_before,
                          rep.headline_accuracy_after, rep.inseparable.size(), secs)};
}

std::vector<bench::TaskSpec> synthetic_taskset(const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<bench::TaskSpec> tasks;
  for (int s = 0; s < 5; ++s) {
    const auto scenario = static_cast<Scenario>(s);
    for (int level = 1; level <= 5; ++level) {
      const synthgen::SynthSpec spec{scenario, 1500, 3, synthgen::strength_for_level(level),
                                     static_cast<std::uint64_t>(500 + tasks.size())};
      bench::TaskSpec t;
      t.id = fmt::format("{}-{}", metrics::to_string(scenario), level);
      t.dataset = dir / (t.id + ".csv");
      tabular::write_table(synthgen::generate(spec), t.dataset);
      t.features = synthgen::feature_columns(scenario);
      t.question = "Check the data for bias.";
      t.bias_type = tasks.size() % 4 == 3                ? bench::BiasType::Implication
                    : metrics::is_distribution(scenario) ? bench::BiasType::Distribution
                                                         : bench::BiasType::Correlation;
      if (scenario == Scenario::CatNum) t.mediator = "mediator";
      tasks.push_back(std::move(t));
    }
  }
  return tasks;
}

Verdict max_rule_consistency() {
  const auto tasks = synthetic_taskset(fs::temp_directory_path() / "biasaudit_acceptance_tasks");
  const auto rep = bench::run_benchmark(tasks, orchestrator::builtin_registry());
  if (rep.failed() > 0) return {false, fmt::format("{} task(s) failed", rep.failed())};
  std::vector<bench::EndResultRecord> recs;
  for (const auto& o : rep.outcomes) recs.push_back(*o.record);
  const double base = bench::score_end_results(recs).s_avg;
  bool perturb_ok = true;
  const double n = static_cast<double>(recs.size());
  for (std::size_t k = 0; k <= recs.size(); ++k) {
    auto moved = recs;
    // +1 level; a task already at 5 moves to 4, which is the same distance.
    for (std::size_t i = 0; i < k; ++i) moved[i].x += moved[i].x == 5 ? -1 : 1;
    perturb_ok &= std::abs(bench::score_end_results(moved).s_avg - (100 - 25 * static_cast<double>(k) / n)) <= kPerturbTol;
  }
  bool rows_ok = true;
  for (const auto& row : rep.rows) rows_ok &= row.n == 0 || (row.score && row.score->s_avg == 100.0);
  const bool ok = recs.size() == 25 && base == 100.0 && rows_ok && perturb_ok;
  return {ok, fmt::format("{} tasks, S_avg {:.4f}; perturbation identity over k=0..{} {}", recs.size(), base,
                          recs.size(), perturb_ok ? "exact" : "violated")};
}

struct TreeDiff {
  std::size_t files = 0;
  std::size_t differing = 0;
};

TreeDiff compare_trees(const fs::path& a, const fs::path& b) {
  TreeDiff d;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++d.files;
    const auto other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++d.differing;
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file() && !fs::exists(a / fs::relative(e.path(), b))) ++d.differing;
  }
  return d;
}

int detect_into(const fs::path& dir) {
  const auto sample = (kData / "sample.csv").string();
#ifdef BIASAUDIT_HAVE_CLI
  std::istringstream in;
  std::ostringstream out, err;
  return cli::run({"detect", sample, "-f", "gender,income", "--out", dir.string()}, in, out, err);
#else
  orchestrator::TaskContext t;
  t.dataset = sample;
  t.features = {"gender", "income"};
  t.question = "Is income associated with gender?";
  orchestrator::RulePlanner planner;
  orchestrator::RuleAdvisor advisor;
  orchestrator::SessionOptions so;
  so.advisor = &advisor;
  const auto res = orchestrator::run_session(t, planner, orchestrator::builtin_registry(), so);
  orchestrator::write_session(res, dir);
  return res.report.complete ? 0 : 2;
#endif
}

Verdict determinism() {
  const auto a = fs::temp_directory_path() / "biasaudit_acceptance_detect_a";
  const auto b = fs::temp_directory_path() / "biasaudit_acceptance_detect_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const int ca = detect_into(a);
  const int cb = detect_into(b);
  const auto diff = compare_trees(a, b);

  const auto tasks = bench::load_taskset(kData / "sample_taskset.json");
  const auto rep = bench::run_benchmark(tasks, orchestrator::builtin_registry());
  const auto md = bench::render_benchmark_markdown(rep);
  std::vector<std::string> labels;
  for (const auto& r : rep.rows) labels.push_back(r.label);
  const std::vector<std::string> want{"Distribution", "Correlation", "Implication", "Overall"};
  bool rows_present = labels == want;
  for (const auto& l : want) rows_present &= md.find("| " + l + " |") != std::string::npos;

  const bool ok = ca == 0 && cb == 0 && diff.files > 3 && diff.differing == 0 && rows_present && rep.failed() == 0;
  return {ok, fmt::format("detect exit {}/{}, {} files, {} differing; bench rows [{}], {} failed", ca, cb, diff.files,
                          diff.differing, fmt::join(labels, ", "), rep.failed())};
}

Verdict process_rubric() {
  bench::HeuristicJudge judge;
  const auto weak = bench::score_process(orchestrator::SessionLog::load(kFixtures / "no_tool_session.jsonl"), judge);
  const auto& tool = weak.at(bench::Dimension::Tooling);
  const bool weak_ok = tool.rating >= bench::Rating::Mediocre;

  orchestrator::TaskContext t;
  t.dataset = kData / "sample.csv";
  t.features = {"gender"};
  t.question = "Is the gender distribution balanced?";
  orchestrator::RulePlanner planner;
  orchestrator::RuleAdvisor advisor;
  orchestrator::SessionOptions so;
  so.advisor = &advisor;
  const auto res = orchestrator::run_session(t, planner, orchestrator::builtin_registry(), so);
  const auto clean = bench::score_process(res.log, judge);
  double lowest = 100;
  for (auto d : bench::kAllDimensions) lowest = std::min(lowest, clean.at(d).score);
  const bool ok = weak_ok && lowest >= 75;
  return {ok, fmt::format("no-tool Tooling {:.1f} ({}); clean session minimum {:.1f}", tool.score,
                          bench::to_string(tool.rating), lowest)};
}

Verdict invariances() {
  const auto st = invariance::run(kInvarianceTrials, 99);
  const bool ok = st.trials == kInvarianceTrials && st.violations == 0;
  return {ok, fmt::format("{} trials, {} checks, {} violations{}", st.trials, st.checks, st.violations,
                          st.examples.empty() ? "" : "; e.g. " + st.examples.front())};
}

// The refusing client must actually be consulted: a chat session with a key
// but no transport has to fail with NetworkError after at least one attempt.
Verdict offline_guarantee(const net::RefusingHttpClient& guard) {
  const std::size_t during_gate = guard.attempts();

  auto control = std::make_shared<net::RefusingHttpClient>();
  net::set_client_override(control);
  ::setenv("BIASAUDIT_ACCEPTANCE_KEY", "control", 1);
  orchestrator::ChatConfig cfg;
  cfg.api_key_env = "BIASAUDIT_ACCEPTANCE_KEY";
  cfg.backoff_ms = 0;
  cfg.max_attempts = 1;
  const auto registry = orchestrator::builtin_registry();
  orchestrator::ChatPlanner planner(cfg, registry);
  orchestrator::TaskContext t;
  t.dataset = kData / "sample.csv";
  t.features = {"gender"};
  t.question = "Is gender balanced?";
  const auto res = orchestrator::run_session(t, planner, registry);
  ::unsetenv("BIASAUDIT_ACCEPTANCE_KEY");

  const bool control_ok = res.error == Errc::NetworkError && control->attempts() > 0;
  return {during_gate == 0 && control_ok,
          fmt::format("{} connection attempt(s) during criteria 1-8; control session refused after {} attempt(s)",
                      during_gate, control->attempts())};
}

}  // namespace

int main() {
  auto guard = std::make_shared<net::RefusingHttpClient>();
  net::set_client_override(guard);

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"metric oracle suite", oracle_suite},
      {"closed-form anchors", anchors},
      {"max/min ratio thresholds", ratio_thresholds},
      {"calibration", calibration},
      {"max-rule consistency", max_rule_consistency},
      {"end-to-end determinism", determinism},
      {"process rubric", process_rubric},
      {"invariance suite", invariances},
      {"offline guarantee", [&] { return offline_guarantee(*guard); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, fmt::format("threw: {}", e.what())};
    }
    failures += v.pass ? 0 : 1;
    fmt::print("{} {}. {}: {}\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
