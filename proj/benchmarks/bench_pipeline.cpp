// SPDX-License-Identifier: Apache-2.0
// End-to-end costs: CSV ingestion and one offline audit session.

#include <benchmark/benchmark.h>

#include <filesystem>

#include "biasaudit/orchestrator.hpp"
#include "biasaudit/synthgen.hpp"

namespace {

using namespace biasaudit;

void read_csv(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto path = std::filesystem::temp_directory_path() / "biasaudit_bench_read.csv";
  tabular::write_table(synthgen::generate({metrics::Scenario::CatNum, n, 4, 0.5, 1}), path);
  for (auto _ : state) benchmark::DoNotOptimize(tabular::load_table(path));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * std::filesystem::file_size(path)));
}
BENCHMARK(read_csv)->RangeMultiplier(10)->Range(1000, 100000)->Unit(benchmark::kMillisecond);

void offline_session(benchmark::State& state) {
  const auto registry = orchestrator::builtin_registry();
  orchestrator::TaskContext task;
  task.dataset = std::filesystem::path(BIASAUDIT_DATA) / "sample.csv";
  task.features = {"gender", "income"};
  task.question = "Is income associated with gender?";
  for (auto _ : state) {
    orchestrator::RulePlanner planner;
    orchestrator::RuleAdvisor advisor;
    orchestrator::SessionOptions so;
    so.advisor = &advisor;
    benchmark::DoNotOptimize(orchestrator::run_session(task, planner, registry, so));
  }
}
BENCHMARK(offline_session)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
