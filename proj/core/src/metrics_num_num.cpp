// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "biasaudit/metrics.hpp"
#include "metrics_detail.hpp"
#include "stats.hpp"

namespace biasaudit::metrics {

using detail::make_result;

namespace {

bool constant(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo == *hi;
}

void require_varying(std::span<const double> x, std::span<const double> y, std::string_view id) {
  if (constant(x) || constant(y)) throw Error(Errc::ConstantColumn, fmt::format("{}: an input column is constant", id));
}

// Equal-frequency bin of every value. Tied values share the bin of the first
// position they occupy in sorted order.
std::vector<int> equal_frequency_bins(std::span<const double> v, int bins) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<int> bin(n);
  std::size_t p = 0;
  while (p < n) {
    std::size_t q = p;
    while (q < n && v[order[q]] == v[order[p]]) ++q;
    const int b = static_cast<int>(p * static_cast<std::size_t>(bins) / n);
    for (std::size_t i = p; i < q; ++i) bin[order[i]] = b;
    p = q;
  }
  return bin;
}

double entropy_of(const std::vector<double>& p) {
  long double h = 0;
  for (double v : p) {
    if (v > 0) h -= v * std::log(v);
  }
  return static_cast<double>(h);
}

// (average rank - 0.5) / n, in (0, 1).
std::vector<double> pseudo_observations(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> u(n);
  std::size_t p = 0;
  while (p < n) {
    std::size_t q = p;
    while (q < n && v[order[q]] == v[order[p]]) ++q;
    const double avg_rank = (static_cast<double>(p + 1) + static_cast<double>(q)) / 2.0;
    for (std::size_t i = p; i < q; ++i) u[order[i]] = (avg_rank - 0.5) / static_cast<double>(n);
    p = q;
  }
  return u;
}

// Gaussian smoothing of a grid x grid count lattice along both axes. Each
// source cell spreads its mass over the lattice with a kernel renormalized at
// the borders, so total mass is preserved.
std::vector<double> smooth(const std::vector<double>& counts, int grid, double h) {
  const double sigma = h * grid;  // bandwidth in cell units
  const int reach = std::max(1, static_cast<int>(std::ceil(4 * sigma)));
  std::vector<std::vector<double>> kernel(grid);
  std::vector<int> first(grid);
  for (int c = 0; c < grid; ++c) {
    const int lo = std::max(0, c - reach), hi = std::min(grid - 1, c + reach);
    first[c] = lo;
    double total = 0;
    for (int t = lo; t <= hi; ++t) {
      const double z = (t - c) / sigma;
      kernel[c].push_back(std::exp(-0.5 * z * z));
      total += kernel[c].back();
    }
    for (double& w : kernel[c]) w /= total;
  }
  const auto g = static_cast<std::size_t>(grid);
  std::vector<double> pass(g * g, 0.0), out(g * g, 0.0);
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      const double c = counts[i * g + j];
      if (c == 0) continue;
      for (std::size_t t = 0; t < kernel[i].size(); ++t) pass[(first[i] + t) * g + j] += c * kernel[i][t];
    }
  }
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = 0; j < g; ++j) {
      const double c = pass[i * g + j];
      if (c == 0) continue;
      for (std::size_t t = 0; t < kernel[j].size(); ++t) out[i * g + first[j] + t] += c * kernel[j][t];
    }
  }
  return out;
}

// Number of pairs i<j with sorted[j] - sorted[i] <= d.
std::size_t pairs_within(const std::vector<double>& sorted, double d) {
  std::size_t count = 0;
  std::size_t i = 0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    while (i < j && sorted[j] - sorted[i] > d) ++i;
    count += j - i;
  }
  return count;
}

// k-th smallest (1-based) pairwise distance among the pairs with distance > floor.
double kth_pair_distance(const std::vector<double>& sorted, std::size_t k, double floor) {
  const std::size_t below = pairs_within(sorted, floor);
  k += below;
  double lo = floor, hi = sorted.back() - sorted.front();
  // Narrow until count(lo) < k <= count(hi); the answer then is the smallest
  // distance strictly above lo.
  for (int it = 0; it < 200; ++it) {
    const double mid = lo + (hi - lo) / 2;
    if (mid <= lo || mid >= hi) break;
    if (pairs_within(sorted, mid) >= k) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  double best = hi;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    auto it = std::upper_bound(sorted.begin() + static_cast<std::ptrdiff_t>(i) + 1, sorted.end(), sorted[i] + lo);
    if (it != sorted.end()) best = std::min(best, *it - sorted[i]);
  }
  return best;
}

// Median of the pairwise distances; zero distances are skipped when they
// would make the median zero.
double median_heuristic(std::span<const double> v) {
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) return 0.0;
  const std::size_t n = sorted.size();
  std::size_t total = n * (n - 1) / 2;
  double floor = -1.0;
  const std::size_t zeros = pairs_within(sorted, 0.0);
  auto median_at = [&](std::size_t m, double fl) {
    const double a = kth_pair_distance(sorted, (m + 1) / 2, fl);
    if (m % 2 == 1) return a;
    return (a + kth_pair_distance(sorted, m / 2 + 1, fl)) / 2;
  };
  double med = median_at(total, floor);
  if (med <= 0) {
    floor = 0.0;
    total -= zeros;
    med = median_at(total, floor);
  }
  return med;
}

struct HsicTerms {
  double kl = 0, kk = 0, ll = 0;
};

// Traces tr(KHLH), tr(KHKH), tr(LHLH) without materializing the Gram matrices.
HsicTerms hsic_traces(std::span<const double> x, std::span<const double> y, double sx, double sy) {
  const std::size_t n = x.size();
  const double gx = 1.0 / (2 * sx * sx), gy = 1.0 / (2 * sy * sy);
  std::vector<long double> a(n, 1.0L), b(n, 1.0L);  // row sums, diagonal included
  long double s_kl = n, s_kk = n, s_ll = n;
  for (std::size_t i = 0; i < n; ++i) {
    long double row_kl = 0, row_kk = 0, row_ll = 0, ra = 0, rb = 0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      const double k = std::exp(-gx * dx * dx);
      const double l = std::exp(-gy * dy * dy);
      row_kl += k * l;
      row_kk += k * k;
      row_ll += l * l;
      ra += k;
      rb += l;
      a[j] += k;
      b[j] += l;
    }
    a[i] += ra;
    b[i] += rb;
    s_kl += 2 * row_kl;
    s_kk += 2 * row_kk;
    s_ll += 2 * row_ll;
  }
  long double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  const long double nn = n;
  HsicTerms t;
  t.kl = static_cast<double>(s_kl - 2 * sab / nn + sa * sb / (nn * nn));
  t.kk = static_cast<double>(s_kk - 2 * saa / nn + sa * sa / (nn * nn));
  t.ll = static_cast<double>(s_ll - 2 * sbb / nn + sb * sb / (nn * nn));
  return t;
}

}  // namespace

MetricResult num_num_from_values(std::span<const double> x, std::span<const double> y, std::string_view metric_id,
                                 const MetricOptions& opts) {
  detail::require_scenario(metric_id, Scenario::NumNum);
  opts.validate();
  if (x.size() != y.size()) throw Error(Errc::InvalidArgument, "x and y differ in length");
  const std::size_t n = x.size();
  // Pearson is closed-form and defined from three points; the binned and
  // kernel estimators need more data to mean anything.
  const std::size_t need =
      metric_id == "pearson" ? 3 : std::max<std::size_t>(8, static_cast<std::size_t>(opts.bins));
  if (n < need) throw Error(Errc::InsufficientSamples, fmt::format("{} needs n >= {}, got {}", metric_id, need, n));

  auto r = make_result(metric_id, Scenario::NumNum, n);
  if (metric_id == "pearson") {
    require_varying(x, y, metric_id);
    const double mx = stats::mean(x), my = stats::mean(y);
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    r.raw["r"] = std::clamp(static_cast<double>(sxy / std::sqrt(sxx * syy)), -1.0, 1.0);
    r.details = fmt::format("n={}", n);
  } else if (metric_id == "nmi") {
    const auto bx = equal_frequency_bins(x, opts.bins);
    const auto by = equal_frequency_bins(y, opts.bins);
    const auto k = static_cast<std::size_t>(opts.bins);
    std::vector<double> joint(k * k, 0.0), px(k, 0.0), py(k, 0.0);
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      joint[bx[i] * k + by[i]] += w;
      px[bx[i]] += w;
      py[by[i]] += w;
    }
    long double mi = 0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double p = joint[i * k + j];
        if (p > 0) mi += p * std::log(p / (px[i] * py[j]));
      }
    }
    const double hx = entropy_of(px), hy = entropy_of(py);
    const double mi_d = std::max(0.0, static_cast<double>(mi));
    r.raw["MI"] = mi_d;
    r.raw["NMI"] = (hx > 0 && hy > 0) ? std::clamp(mi_d / std::sqrt(hx * hy), 0.0, 1.0) : 0.0;
    r.details = fmt::format("{} equal-frequency bins, H(x)={:.4g}, H(y)={:.4g}", opts.bins, hx, hy);
  } else if (metric_id == "hgr_approximation") {
    require_varying(x, y, metric_id);
    const auto u = pseudo_observations(x);
    const auto v = pseudo_observations(y);
    const int grid = opts.kde_grid;
    const auto g = static_cast<std::size_t>(grid);
    std::vector<double> lattice(g * g, 0.0);
    auto cell = [grid](double t) { return std::min(grid - 1, static_cast<int>(t * grid)); };
    for (std::size_t i = 0; i < n; ++i) lattice[cell(u[i]) * g + cell(v[i])] += 1.0;
    // Scott's rule for a bivariate density on uniform margins (sd 1/sqrt(12)).
    const double h = std::pow(static_cast<double>(n), -1.0 / 6.0) / std::sqrt(12.0);
    const auto dens = smooth(lattice, grid, h);
    const auto k = static_cast<std::size_t>(opts.bins);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < g; ++i) {
      for (std::size_t j = 0; j < g; ++j) {
        p(static_cast<Eigen::Index>(i * k / g), static_cast<Eigen::Index>(j * k / g)) += dens[i * g + j];
      }
    }
    p /= p.sum();
    const Eigen::VectorXd pi = p.rowwise().sum();
    const Eigen::VectorXd pj = p.colwise().sum().transpose();
    Eigen::MatrixXd q(p.rows(), p.cols());
    double chi2 = -1.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double denom = pi(i) * pj(j);
        q(i, j) = denom > 0 ? p(i, j) / std::sqrt(denom) : 0.0;
        if (denom > 0) chi2 += p(i, j) * p(i, j) / denom;
      }
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(q);
    const auto& sv = svd.singularValues();
    r.raw["hgr"] = std::clamp(sv.size() > 1 ? sv(1) : 0.0, 0.0, 1.0);
    r.raw["chi2_divergence"] = std::max(0.0, chi2);
    r.details = fmt::format("{}x{} bins from a {}x{} smoothed lattice, bandwidth {:.4g}", k, k, grid, grid, h);
  } else if (metric_id == "wasserstein") {
    require_varying(x, y, metric_id);
    auto standardized = [](std::span<const double> v) {
      const double m = stats::mean(v), s = stats::population_sd(v);
      std::vector<double> out;
      out.reserve(v.size());
      for (double t : v) out.push_back((t - m) / s);
      std::sort(out.begin(), out.end());
      return out;
    };
    const auto sx = standardized(x);
    const auto sy = standardized(y);
    long double acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += (sx[i] - sy[i]) * (sx[i] - sy[i]);
    r.raw["W2"] = std::sqrt(static_cast<double>(acc / n));
    r.details = "standardized quantile coupling";
  } else {  // hsic
    require_varying(x, y, metric_id);
    const double sx = median_heuristic(x), sy = median_heuristic(y);
    const auto t = hsic_traces(x, y, sx, sy);
    const double scale = static_cast<double>(n - 1) * static_cast<double>(n - 1);
    const double hsic = t.kl / scale;
    const double norm = std::sqrt(std::max(0.0, t.kk) * std::max(0.0, t.ll));
    r.raw["HSIC"] = hsic;
    r.raw["nHSIC"] = norm > 0 ? std::clamp(t.kl / norm, 0.0, 1.0) : 0.0;
    r.details = fmt::format("RBF kernels, median-heuristic bandwidths {:.4g} and {:.4g}", sx, sy);
  }
  return r;
}

MetricResult detect_num_num(const tabular::Column& x, const tabular::Column& y, std::string_view metric_id,
                            const MetricOptions& opts) {
  detail::require_numerical(x);
  detail::require_numerical(y);
  if (x.size() != y.size()) throw Error(Errc::InvalidArgument, "columns differ in length");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.is_missing(i) || y.is_missing(i)) continue;
    xs.push_back(x.number(i));
    ys.push_back(y.number(i));
  }
  return num_num_from_values(xs, ys, metric_id, opts);
}

}  // namespace biasaudit::metrics
