// SPDX-License-Identifier: Apache-2.0
// Per-metric cost on generated tables. Arguments are row counts.

#include <benchmark/benchmark.h>

#include "biasaudit/metrics.hpp"
#include "biasaudit/synthgen.hpp"

namespace {

using namespace biasaudit;
using metrics::Scenario;

void run_metric(benchmark::State& state, Scenario scenario, const char* metric_id) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto table = synthgen::generate({scenario, n, 3, 0.5, 42});
  std::vector<tabular::Column> cols;
  for (const auto& name : synthgen::feature_columns(scenario)) cols.push_back(table.column(name));
  metrics::MetricOptions opts;
  if (table.has_column("mediator")) opts.mediator = table.column("mediator");
  for (auto _ : state) benchmark::DoNotOptimize(metrics::detect(scenario, cols, metric_id, opts));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

#define BIASAUDIT_METRIC_BENCH(scenario, id)                                                    \
  BENCHMARK_CAPTURE(run_metric, id, Scenario::scenario, #id)->RangeMultiplier(10)->Range(1000, 100000)

BIASAUDIT_METRIC_BENCH(CatDist, gini);
BIASAUDIT_METRIC_BENCH(NumDist, outlier);
BIASAUDIT_METRIC_BENCH(NumDist, quantile_deviation);
BIASAUDIT_METRIC_BENCH(CatCat, cramers_v);
BIASAUDIT_METRIC_BENCH(CatNum, cohens_d);
BIASAUDIT_METRIC_BENCH(CatNum, pse);
BIASAUDIT_METRIC_BENCH(NumNum, pearson);
BIASAUDIT_METRIC_BENCH(NumNum, nmi);
BIASAUDIT_METRIC_BENCH(NumNum, wasserstein);

// HSIC builds n x n Gram matrices; keep it to small samples.
BENCHMARK_CAPTURE(run_metric, hsic, Scenario::NumNum, "hsic")->RangeMultiplier(2)->Range(250, 2000);

}  // namespace

BENCHMARK_MAIN();
