// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include "biasaudit/error.hpp"
#include "biasaudit/metrics.hpp"

namespace biasaudit::metrics::detail {

inline MetricResult make_result(std::string_view id, Scenario s, std::size_t n) {
  MetricResult r;
  r.metric_id = std::string(id);
  r.scenario = s;
  r.n = n;
  return r;
}

/// Throws UnknownMetric unless `id` belongs to `s`.
void require_scenario(std::string_view id, Scenario s);

inline void require_numerical(const tabular::Column& c) {
  if (!c.is_numerical()) throw Error(Errc::InvalidArgument, "column '" + c.name() + "' is not numerical");
}

}  // namespace biasaudit::metrics::detail
