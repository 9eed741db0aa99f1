// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force reference evaluations of the 25 metrics, written straight from
// the definitions without sharing code with the library.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "biasaudit/metrics.hpp"

namespace oracle {

struct Instance {
  std::vector<biasaudit::tabular::Column> cols;
  biasaudit::metrics::MetricOptions opts;
};

enum class Outcome { Value, Error, Skip };

struct Reference {
  Outcome outcome = Outcome::Skip;
  std::map<std::string, double> raw;
};

/// Small random instance: n <= 12, at most 3 categories per column.
Instance random_instance(biasaudit::metrics::Scenario s, std::mt19937_64& rng);

/// Reference raw values; Error where the definition is undefined, Skip where
/// the instance falls in a degenerate branch the oracle does not model.
Reference evaluate(biasaudit::metrics::Scenario s, const Instance& inst, const std::string& metric_id);

struct SuiteStats {
  std::string metric_id;
  std::size_t compared = 0;       // instances where both produced values
  std::size_t errors_agreed = 0;  // both rejected the instance
  std::size_t disagreements = 0;  // one raised and the other did not
  double max_err = 0;  // |got - ref| / max(1, |ref|)
  std::string first_failure;
};

/// Draws instances per metric until `per_metric` value comparisons were made
/// (or a draw limit is hit) and reports the largest deviation.
std::vector<SuiteStats> run_suite(std::size_t per_metric, std::uint64_t seed, double tol);

}  // namespace oracle
