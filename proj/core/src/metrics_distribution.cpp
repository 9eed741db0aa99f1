// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "biasaudit/metrics.hpp"
#include "metrics_detail.hpp"
#include "stats.hpp"

namespace biasaudit::metrics {

using detail::make_result;

namespace {

double shannon_entropy(std::span<const double> counts, double n) {
  long double h = 0;
  for (double c : counts) {
    if (c <= 0) continue;
    const double p = c / n;
    h -= p * std::log(p);
  }
  return static_cast<double>(h);
}

void require_categories(std::size_t k, std::string_view id) {
  if (k < 2) throw Error(Errc::SingleCategory, fmt::format("{} needs at least two categories", id));
}

}  // namespace

MetricResult cat_dist_from_counts(std::span<const double> counts, std::string_view metric_id,
                                  const MetricOptions& opts) {
  detail::require_scenario(metric_id, Scenario::CatDist);
  opts.validate();
  long double total = 0;
  for (double c : counts) {
    if (!(c >= 0) || !std::isfinite(c)) throw Error(Errc::InvalidArgument, "category counts must be finite and >= 0");
    total += c;
  }
  const double n = static_cast<double>(total);
  if (n <= 0) throw Error(Errc::InsufficientSamples, "no observations");
  const std::size_t k = counts.size();

  auto r = make_result(metric_id, Scenario::CatDist, static_cast<std::size_t>(n));
  if (metric_id == "shannon_balance" || metric_id == "entropy") {
    require_categories(k, metric_id);
    const double h = shannon_entropy(counts, n);
    const double norm = std::clamp(h / std::log(static_cast<double>(k)), 0.0, 1.0);
    r.raw["H"] = h;
    r.raw[metric_id == "entropy" ? "H_norm" : "balance"] = norm;
    r.details = fmt::format("k={} categories, H={:.4g} nats", k, h);
  } else if (metric_id == "max_min_ratio") {
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    const double ratio = *lo > 0 ? *hi / *lo : std::numeric_limits<double>::infinity();
    r.raw["ratio"] = ratio;
    r.details = *lo > 0 ? fmt::format("max count {} / min count {}", *hi, *lo)
                        : std::string("a declared category has zero observations");
  } else if (metric_id == "gini") {
    require_categories(k, metric_id);
    long double sum_sq = 0;
    for (double c : counts) {
      const double q = (c + 1.0) / (n + static_cast<double>(k));
      sum_sq += q * q;
    }
    const double g = 1.0 - static_cast<double>(sum_sq);
    r.raw["G"] = g;
    r.raw["G_norm"] = std::clamp(g / (1.0 - 1.0 / static_cast<double>(k)), 0.0, 1.0);
    r.details = fmt::format("Laplace-smoothed over k={} categories", k);
  } else {  // relative_risk
    double worst = 0;
    std::string per;
    for (std::size_t i = 0; i < k; ++i) {
      const double rr = (counts[i] / n) * static_cast<double>(k);
      worst = std::max(worst, std::abs(rr - 1.0));
      per += fmt::format("{}{:.4g}", i ? ", " : "", rr);
    }
    r.raw["rr_dev_max"] = worst;
    r.details = "RR per category: " + per;
  }
  return r;
}

MetricResult detect_cat_dist(const tabular::Column& col, std::string_view metric_id, const MetricOptions& opts) {
  std::map<std::string, double> counts;
  for (std::size_t i = 0; i < col.size(); ++i) {
    if (!col.is_missing(i)) counts[col.text(i)] += 1.0;
  }
  std::vector<double> c;
  std::string labels;
  for (const auto& [label, count] : counts) {
    c.push_back(count);
    if (labels.size() < 200) labels += fmt::format("{}{}={}", labels.empty() ? "" : ", ", label, count);
  }
  auto r = cat_dist_from_counts(c, metric_id, opts);
  r.details += "; counts: " + labels;
  return r;
}

MetricResult num_dist_from_values(std::span<const double> values, std::string_view metric_id,
                                  const MetricOptions& opts) {
  detail::require_scenario(metric_id, Scenario::NumDist);
  opts.validate();
  const std::size_t n = values.size();
  if (n < 3) throw Error(Errc::InsufficientSamples, fmt::format("{} needs n >= 3, got {}", metric_id, n));

  const double m = stats::mean(values);
  long double s2 = 0, s3 = 0, s4 = 0;
  for (double x : values) {
    const long double d = x - m;
    s2 += d * d;
    s3 += d * d * d;
    s4 += d * d * d * d;
  }
  const double m2 = static_cast<double>(s2 / n);
  const double m3 = static_cast<double>(s3 / n);
  const double m4 = static_cast<double>(s4 / n);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi || m2 <= 0) throw Error(Errc::ConstantColumn, fmt::format("{}: column is constant", metric_id));

  auto r = make_result(metric_id, Scenario::NumDist, n);
  if (metric_id == "skewness") {
    r.raw["g1"] = m3 / std::pow(m2, 1.5);
    r.details = fmt::format("m2={:.4g}, m3={:.4g}", m2, m3);
  } else if (metric_id == "kurtosis") {
    r.raw["g2"] = m4 / (m2 * m2) - 3.0;
    r.details = fmt::format("m2={:.4g}, m4={:.4g} (excess kurtosis)", m2, m4);
  } else if (metric_id == "outlier") {
    const double sd = std::sqrt(m2);
    std::size_t count = 0;
    for (double x : values) {
      if (std::abs(x - m) / sd > opts.z_cutoff) ++count;
    }
    r.raw["fraction"] = static_cast<double>(count) / static_cast<double>(n);
    r.raw["count"] = static_cast<double>(count);
    r.details = fmt::format("{} of {} points beyond |z| > {}", count, n, opts.z_cutoff);
  } else if (metric_id == "cohens_d_mad") {
    const double med = stats::median({values.begin(), values.end()});
    const double mad = stats::mad(values);
    if (mad <= 0) throw Error(Errc::ZeroVariance, "median absolute deviation is zero");
    r.raw["d"] = (m - med) / (stats::kMadToSd * mad);
    r.details = fmt::format("mean={:.4g}, median={:.4g}, MAD={:.4g}", m, med, mad);
  } else {  // quantile_deviation
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double q1 = stats::quantile_sorted(sorted, 0.25);
    const double q2 = stats::quantile_sorted(sorted, 0.5);
    const double q3 = stats::quantile_sorted(sorted, 0.75);
    if (q3 <= q1) throw Error(Errc::DegenerateIQR, "interquartile range is zero");
    const double qd = (q3 - q2) / (q3 - q1);
    r.raw["QD"] = qd;
    r.raw["deviation"] = std::abs(qd - 0.5);
    r.details = fmt::format("Q1={:.4g}, Q2={:.4g}, Q3={:.4g}", q1, q2, q3);
  }
  return r;
}

MetricResult detect_num_dist(const tabular::Column& col, std::string_view metric_id, const MetricOptions& opts) {
  detail::require_numerical(col);
  return num_dist_from_values(col.observed_numbers(), metric_id, opts);
}

}  // namespace biasaudit::metrics
