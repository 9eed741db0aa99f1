// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "biasaudit/metrics.hpp"
#include "metrics_detail.hpp"

namespace biasaudit::metrics {

using detail::make_result;

namespace {

struct Margins {
  std::vector<double> rows;
  std::vector<double> cols;
  double n = 0;
};

Margins margins_of(const Contingency& t) {
  Margins m;
  m.rows.assign(t.size(), 0.0);
  m.cols.assign(t.front().size(), 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = 0; j < t[i].size(); ++j) {
      m.rows[i] += t[i][j];
      m.cols[j] += t[i][j];
      m.n += t[i][j];
    }
  }
  return m;
}

double tvd(std::span<const double> p, std::span<const double> q) {
  long double acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return static_cast<double>(acc / 2);
}

std::vector<double> conditional(const Contingency& t, std::size_t row, double row_total) {
  std::vector<double> p(t[row].size());
  for (std::size_t j = 0; j < p.size(); ++j) p[j] = t[row][j] / row_total;
  return p;
}

void validate(const Contingency& t) {
  if (t.size() < 2 || t.front().size() < 2) {
    throw Error(Errc::DegenerateTable, "contingency table needs at least 2 rows and 2 columns");
  }
  for (const auto& row : t) {
    if (row.size() != t.front().size()) throw Error(Errc::InvalidArgument, "contingency table is not rectangular");
    for (double v : row) {
      if (!(v >= 0) || !std::isfinite(v)) throw Error(Errc::InvalidArgument, "cell counts must be finite and >= 0");
    }
  }
}

}  // namespace

MetricResult cat_cat_from_table(const Contingency& table, std::string_view metric_id, const MetricOptions& opts) {
  detail::require_scenario(metric_id, Scenario::CatCat);
  opts.validate();
  validate(table);
  const Margins m = margins_of(table);
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    if (m.rows[i] <= 0) throw Error(Errc::DegenerateTable, fmt::format("row {} of the table is empty", i));
  }
  for (std::size_t j = 0; j < m.cols.size(); ++j) {
    if (m.cols[j] <= 0) throw Error(Errc::DegenerateTable, fmt::format("column {} of the table is empty", j));
  }
  const std::size_t r_count = m.rows.size();
  const std::size_t c_count = m.cols.size();

  auto r = make_result(metric_id, Scenario::CatCat, static_cast<std::size_t>(m.n));
  if (metric_id == "cramers_v") {
    long double chi2 = 0;
    for (std::size_t i = 0; i < r_count; ++i) {
      for (std::size_t j = 0; j < c_count; ++j) {
        const double e = m.rows[i] * m.cols[j] / m.n;
        if (e > 0) chi2 += (table[i][j] - e) * (table[i][j] - e) / e;
      }
    }
    const double dof = static_cast<double>(std::min(r_count, c_count) - 1);
    r.raw["chi2"] = static_cast<double>(chi2);
    r.raw["V"] = std::clamp(std::sqrt(static_cast<double>(chi2) / (m.n * dof)), 0.0, 1.0);
    r.details = fmt::format("{}x{} table, n={}", r_count, c_count, m.n);
  } else if (metric_id == "elift") {
    double worst = 1.0;
    std::size_t cells = 0;
    for (std::size_t i = 0; i < r_count; ++i) {
      for (std::size_t j = 0; j < c_count; ++j) {
        if (table[i][j] < static_cast<double>(opts.min_support)) continue;
        ++cells;
        const double lift = (table[i][j] / m.rows[i]) / (m.cols[j] / m.n);
        worst = std::max({worst, lift, 1.0 / lift});
      }
    }
    r.raw["elift_max"] = worst;
    r.details = fmt::format("{} cell(s) with support >= {}", cells, opts.min_support);
  } else if (metric_id == "statistical_parity") {
    double delta_max = 0, z_max = 0;
    for (std::size_t y = 0; y < c_count; ++y) {
      for (std::size_t g = 0; g < r_count; ++g) {
        for (std::size_t h = g + 1; h < r_count; ++h) {
          const double pg = table[g][y] / m.rows[g];
          const double ph = table[h][y] / m.rows[h];
          const double delta = std::abs(pg - ph);
          const double pooled = (table[g][y] + table[h][y]) / (m.rows[g] + m.rows[h]);
          const double var = pooled * (1 - pooled) * (1 / m.rows[g] + 1 / m.rows[h]);
          const double z = var > 0 ? delta / std::sqrt(var) : 0.0;
          delta_max = std::max(delta_max, delta);
          z_max = std::max(z_max, z);
        }
      }
    }
    r.raw["delta_max"] = delta_max;
    r.raw["z_max"] = z_max;
    r.details = fmt::format("max parity gap {:.4g} (z={:.4g})", delta_max, z_max);
  } else if (metric_id == "lipschitz") {
    double worst = 0;
    for (std::size_t g = 0; g < r_count; ++g) {
      const auto pg = conditional(table, g, m.rows[g]);
      for (std::size_t h = g + 1; h < r_count; ++h) {
        worst = std::max(worst, tvd(pg, conditional(table, h, m.rows[h])));
      }
    }
    r.raw["L"] = worst;
    r.details = "max pairwise TVD between group-conditional outcome distributions";
  } else {  // total_variation
    std::vector<double> overall(c_count);
    for (std::size_t j = 0; j < c_count; ++j) overall[j] = m.cols[j] / m.n;
    double worst = 0;
    for (std::size_t g = 0; g < r_count; ++g) worst = std::max(worst, tvd(conditional(table, g, m.rows[g]), overall));
    r.raw["tvd_max"] = worst;
    r.details = "max TVD between a group-conditional and the overall outcome distribution";
  }
  return r;
}

MetricResult detect_cat_cat(const tabular::Column& a, const tabular::Column& b, std::string_view metric_id,
                            const MetricOptions& opts) {
  if (a.size() != b.size()) throw Error(Errc::InvalidArgument, "columns differ in length");
  std::map<std::string, std::map<std::string, double>> cells;
  std::map<std::string, std::size_t> outcome_index;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.is_missing(i) || b.is_missing(i)) continue;
    cells[a.text(i)][b.text(i)] += 1.0;
    outcome_index.emplace(b.text(i), 0);
  }
  if (cells.size() < 2 || outcome_index.size() < 2) {
    throw Error(Errc::DegenerateTable, fmt::format("'{}' x '{}' has {} x {} observed categories", a.name(), b.name(),
                                                   cells.size(), outcome_index.size()));
  }
  std::size_t next = 0;
  for (auto& [label, idx] : outcome_index) idx = next++;
  Contingency table(cells.size(), std::vector<double>(outcome_index.size(), 0.0));
  std::size_t row = 0;
  for (const auto& [group, outcomes] : cells) {
    for (const auto& [label, count] : outcomes) table[row][outcome_index.at(label)] = count;
    ++row;
  }
  return cat_cat_from_table(table, metric_id, opts);
}

}  // namespace biasaudit::metrics
