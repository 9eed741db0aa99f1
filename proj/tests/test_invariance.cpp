// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fmt/format.h>

#include "biasaudit/metrics.hpp"
#include "invariance.hpp"

namespace {

using biasaudit::metrics::Contingency;

TEST(Invariance, ThousandRandomizedTrialsWithoutViolation) {
  const auto st = invariance::run(1000, 99);
  EXPECT_EQ(st.trials, 1000u);
  EXPECT_GT(st.checks, 10000u);
  EXPECT_EQ(st.violations, 0u) << fmt::format("{}", fmt::join(st.examples, "\n"));
}

TEST(Invariance, IndependentTablesGiveNullValues) {
  // Rows proportional to each other: outcome independent of group.
  const Contingency t{{10, 20, 30}, {5, 10, 15}, {20, 40, 60}};
  using biasaudit::metrics::cat_cat_from_table;
  biasaudit::metrics::MetricOptions o;
  o.min_support = 1;
  EXPECT_NEAR(cat_cat_from_table(t, "cramers_v", o).at("V"), 0.0, 1e-12);
  EXPECT_NEAR(cat_cat_from_table(t, "total_variation", o).at("tvd_max"), 0.0, 1e-12);
  EXPECT_NEAR(cat_cat_from_table(t, "statistical_parity", o).at("delta_max"), 0.0, 1e-12);
  EXPECT_NEAR(cat_cat_from_table(t, "lipschitz", o).at("L"), 0.0, 1e-12);
  EXPECT_NEAR(cat_cat_from_table(t, "elift", o).at("elift_max"), 1.0, 1e-12);
}

TEST(Invariance, DuplicatedColumnsGiveFullDependence) {
  std::vector<double> x;
  for (int i = 0; i < 60; ++i) x.push_back(std::sin(i * 1.7) * 10 + i * 0.1);
  using biasaudit::metrics::num_num_from_values;
  EXPECT_NEAR(num_num_from_values(x, x, "pearson").at("r"), 1.0, 1e-12);
  EXPECT_NEAR(num_num_from_values(x, x, "nmi").at("NMI"), 1.0, 1e-12);
  EXPECT_NEAR(num_num_from_values(x, x, "hsic").at("nHSIC"), 1.0, 1e-12);
  const Contingency diag{{12, 0, 0}, {0, 7, 0}, {0, 0, 9}};
  EXPECT_NEAR(biasaudit::metrics::cat_cat_from_table(diag, "cramers_v").at("V"), 1.0, 1e-12);
}

}  // namespace
