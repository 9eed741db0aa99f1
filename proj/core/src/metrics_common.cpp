// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <array>
#include <cmath>
#include <limits>

#include "biasaudit/metrics.hpp"
#include "metrics_detail.hpp"

namespace biasaudit::metrics {

namespace {

struct ScenarioInfo {
  Scenario scenario;
  std::string_view tag;
  std::string_view text;
  std::string_view tool_prefix;
};

constexpr std::array<ScenarioInfo, 5> kScenarios{{
    {Scenario::CatDist, "cat_dist", "categorical distribution", "categorical_distribution_"},
    {Scenario::NumDist, "num_dist", "numerical distribution", "numerical_distribution_"},
    {Scenario::CatCat, "cat_cat", "categorical-categorical correlation", "categorical_categorical_correlation_"},
    {Scenario::CatNum, "cat_num", "categorical-numerical correlation", "categorical_numerical_correlation_"},
    {Scenario::NumNum, "num_num", "numerical-numerical correlation", "numerical_numerical_correlation_"},
}};

const ScenarioInfo& info(Scenario s) { return kScenarios[static_cast<std::size_t>(s)]; }

nlohmann::json encode_real(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double decode_real(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::string_view to_string(Scenario s) noexcept { return info(s).tag; }

std::optional<Scenario> scenario_from_string(std::string_view tag) noexcept {
  for (const auto& i : kScenarios) {
    if (i.tag == tag) return i.scenario;
  }
  return std::nullopt;
}

std::string_view describe(Scenario s) noexcept { return info(s).text; }

bool is_distribution(Scenario s) noexcept { return s == Scenario::CatDist || s == Scenario::NumDist; }

double MetricResult::at(std::string_view key) const {
  auto it = raw.find(std::string(key));
  if (it == raw.end()) throw Error(Errc::UnknownMetric, fmt::format("{} has no raw value '{}'", metric_id, key));
  return it->second;
}

void to_json(nlohmann::json& j, const MetricResult& r) {
  nlohmann::json raw = nlohmann::json::object();
  for (const auto& [k, v] : r.raw) raw[k] = encode_real(v);
  j = nlohmann::json{{"metric_id", r.metric_id},
                     {"scenario", std::string(to_string(r.scenario))},
                     {"raw", raw},
                     {"n", r.n},
                     {"details", r.details}};
}

void from_json(const nlohmann::json& j, MetricResult& r) {
  r.metric_id = j.at("metric_id").get<std::string>();
  r.scenario = scenario_of(r.metric_id);
  r.raw.clear();
  for (const auto& [k, v] : j.at("raw").items()) r.raw[k] = decode_real(v);
  r.n = j.at("n").get<std::size_t>();
  r.details = j.value("details", "");
}

void MetricOptions::validate() const {
  if (bins < 2) throw Error(Errc::InvalidArgument, "bins must be >= 2");
  if (kde_grid < 8) throw Error(Errc::InvalidArgument, "kde_grid must be >= 8");
  if (min_support < 1) throw Error(Errc::InvalidArgument, "min_support must be >= 1");
  if (!(z_cutoff > 0)) throw Error(Errc::InvalidArgument, "z_cutoff must be positive");
}

const std::vector<std::string>& metric_ids(Scenario s) {
  static const std::array<std::vector<std::string>, 5> ids{{
      {"shannon_balance", "max_min_ratio", "entropy", "gini", "relative_risk"},
      {"skewness", "kurtosis", "outlier", "cohens_d_mad", "quantile_deviation"},
      {"cramers_v", "elift", "statistical_parity", "lipschitz", "total_variation"},
      {"max_abs_mean", "cohens_d", "standardized_difference", "causal_effect", "pse"},
      {"pearson", "nmi", "hgr_approximation", "wasserstein", "hsic"},
  }};
  return ids[static_cast<std::size_t>(s)];
}

const std::vector<std::string>& all_metric_ids() {
  static const std::vector<std::string> all = [] {
    std::vector<std::string> v;
    for (const auto& i : kScenarios) {
      const auto& ids = metric_ids(i.scenario);
      v.insert(v.end(), ids.begin(), ids.end());
    }
    return v;
  }();
  return all;
}

Scenario scenario_of(std::string_view metric_id) {
  for (const auto& i : kScenarios) {
    for (const auto& id : metric_ids(i.scenario)) {
      if (id == metric_id) return i.scenario;
    }
  }
  throw Error(Errc::UnknownMetric, fmt::format("unknown metric '{}'", metric_id));
}

std::string tool_name(std::string_view metric_id) {
  return fmt::format("{}{}", info(scenario_of(metric_id)).tool_prefix, metric_id);
}

std::optional<std::string> metric_from_tool(std::string_view tool) {
  for (const auto& i : kScenarios) {
    if (!tool.starts_with(i.tool_prefix)) continue;
    const auto rest = tool.substr(i.tool_prefix.size());
    for (const auto& id : metric_ids(i.scenario)) {
      if (id == rest) return id;
    }
  }
  return std::nullopt;
}

Scenario classify_scenario(std::span<const tabular::Column> cols, StatedBias stated) {
  if (cols.empty() || cols.size() > 2) {
    throw Error(Errc::UnsupportedArity, fmt::format("expected 1 or 2 features, got {}", cols.size()));
  }
  if (cols.size() == 1) {
    if (stated == StatedBias::Correlation) {
      throw Error(Errc::InvalidArgument, "correlation bias needs two features");
    }
    return cols[0].is_numerical() ? Scenario::NumDist : Scenario::CatDist;
  }
  if (stated == StatedBias::Distribution) {
    throw Error(Errc::InvalidArgument, "distribution bias takes a single feature");
  }
  const int numeric = int(cols[0].is_numerical()) + int(cols[1].is_numerical());
  if (numeric == 0) return Scenario::CatCat;
  if (numeric == 1) return Scenario::CatNum;
  return Scenario::NumNum;
}

namespace detail {

void require_scenario(std::string_view id, Scenario s) {
  if (scenario_of(id) != s) {
    throw Error(Errc::UnknownMetric, fmt::format("metric '{}' does not belong to scenario {}", id, to_string(s)));
  }
}

}  // namespace detail

MetricResult detect(Scenario scenario, std::span<const tabular::Column> cols, std::string_view metric_id,
                    const MetricOptions& opts) {
  const std::size_t want = is_distribution(scenario) ? 1 : 2;
  if (cols.size() != want) {
    throw Error(Errc::UnsupportedArity,
                fmt::format("scenario {} takes {} column(s), got {}", to_string(scenario), want, cols.size()));
  }
  switch (scenario) {
    case Scenario::CatDist: return detect_cat_dist(cols[0], metric_id, opts);
    case Scenario::NumDist: return detect_num_dist(cols[0], metric_id, opts);
    case Scenario::CatCat: return detect_cat_cat(cols[0], cols[1], metric_id, opts);
    case Scenario::CatNum:
      if (cols[0].is_numerical() && !cols[1].is_numerical()) return detect_cat_num(cols[1], cols[0], metric_id, opts);
      return detect_cat_num(cols[0], cols[1], metric_id, opts);
    case Scenario::NumNum: return detect_num_num(cols[0], cols[1], metric_id, opts);
  }
  throw Error(Errc::InvalidArgument, "unhandled scenario");
}

}  // namespace biasaudit::metrics
