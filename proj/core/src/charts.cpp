// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>

#include "biasaudit/error.hpp"
#include "biasaudit/reporting.hpp"
#include "stats.hpp"

namespace biasaudit::reporting {

namespace {

struct KindInfo {
  ChartKind kind;
  std::string_view name;
  std::string_view tool;
};

constexpr std::array<KindInfo, 9> kKinds{{
    {ChartKind::Bar, "bar", "plot_bar_chart"},
    {ChartKind::Pie, "pie", "plot_pie_chart"},
    {ChartKind::HorizontalBar, "horizontal_bar", "plot_horizontal_bar_chart"},
    {ChartKind::Treemap, "treemap", "plot_treemap"},
    {ChartKind::Heatmap, "heatmap", "plot_heatmap"},
    {ChartKind::CorrelationHeatmap, "correlation_heatmap", "plot_correlation_heatmap"},
    {ChartKind::StackedBar, "stacked_bar", "plot_stacked_bar_chart"},
    {ChartKind::GroupedBar, "grouped_bar", "plot_grouped_bar_chart"},
    {ChartKind::Box, "box", "plot_box_plot"},
}};

constexpr std::array<std::string_view, 10> kPalette{"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                                    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 72, kRight = 24, kTop = 48, kBottom = 72;
constexpr double kPlotW = kWidth - kLeft - kRight;
constexpr double kPlotH = kHeight - kTop - kBottom;

std::string_view color(std::size_t i) { return kPalette[i % kPalette.size()]; }

std::string esc(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) { return fmt::format("{:.2f}", v); }

class Svg {
 public:
  explicit Svg(const ChartSpec& spec) {
    body_ += fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"11\" data-kind=\"{2}\">\n",
        kWidth, kHeight, to_string(spec.kind));
    if (!spec.title.empty()) {
      text(kWidth / 2, 28, spec.title, "middle", "title", 15);
    }
    if (!spec.x_label.empty()) text(kLeft + kPlotW / 2, kHeight - 14, spec.x_label, "middle", "x-label");
    if (!spec.y_label.empty()) {
      body_ += fmt::format(
          "<text class=\"y-label\" x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
          num(kTop + kPlotH / 2), num(kTop + kPlotH / 2), esc(spec.y_label));
    }
  }

  void raw(const std::string& s) { body_ += s; }

  void text(double x, double y, std::string_view s, std::string_view anchor = "middle", std::string_view cls = "label",
            int size = 11) {
    body_ += fmt::format("<text class=\"{}\" x=\"{}\" y=\"{}\" text-anchor=\"{}\"{}>{}</text>\n", cls, num(x), num(y),
                         anchor, size != 11 ? fmt::format(" font-size=\"{}\"", size) : std::string(), esc(s));
  }

  void line(double x1, double y1, double x2, double y2, std::string_view cls = "axis") {
    body_ += fmt::format("<line class=\"{}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333\"/>\n", cls, num(x1),
                         num(y1), num(x2), num(y2));
  }

  // Left axis with 5 ticks over [lo, hi] mapped to the plot area.
  void y_axis(double lo, double hi) {
    line(kLeft, kTop, kLeft, kTop + kPlotH);
    for (int t = 0; t <= 4; ++t) {
      const double v = lo + (hi - lo) * t / 4.0;
      const double y = kTop + kPlotH - kPlotH * t / 4.0;
      line(kLeft - 4, y, kLeft, y, "tick");
      text(kLeft - 6, y + 4, format_value(v), "end", "tick-label");
    }
  }

  void x_axis() { line(kLeft, kTop + kPlotH, kLeft + kPlotW, kTop + kPlotH); }

  std::string finish() { return body_ + "</svg>\n"; }

 private:
  std::string body_;
};

[[noreturn]] void arity(const ChartSpec& spec, std::string_view want) {
  throw Error(Errc::ArityMismatch, fmt::format("{} chart needs {}", to_string(spec.kind), want));
}

template <class T>
const T& need(const ChartSpec& spec, std::string_view want) {
  if (const auto* p = std::get_if<T>(&spec.data)) return *p;
  arity(spec, want);
}

void check_series(const CategorySeries& s) {
  if (s.labels.size() != s.values.size()) throw Error(Errc::ArityMismatch, "labels and values differ in length");
  if (s.labels.empty()) throw Error(Errc::EmptyData, "no categories to draw");
  for (double v : s.values) {
    if (!(v >= 0) || !std::isfinite(v)) throw Error(Errc::InvalidArgument, "chart values must be finite and >= 0");
  }
}

void check_crosstab(const CrossTab& c) {
  if (c.rows.empty() || c.cols.empty()) throw Error(Errc::EmptyData, "empty cross-tabulation");
  if (c.counts.size() != c.rows.size()) throw Error(Errc::ArityMismatch, "cross-tab row count mismatch");
  for (const auto& row : c.counts) {
    if (row.size() != c.cols.size()) throw Error(Errc::ArityMismatch, "cross-tab column count mismatch");
    for (double v : row) {
      if (!(v >= 0) || !std::isfinite(v)) throw Error(Errc::InvalidArgument, "counts must be finite and >= 0");
    }
  }
}

double max_of(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

std::string bar(const ChartSpec& spec) {
  const auto& s = need<CategorySeries>(spec, "one category series");
  check_series(s);
  Svg svg(spec);
  const double top = std::max(max_of(s.values), 1e-12);
  svg.y_axis(0, top);
  svg.x_axis();
  const double slot = kPlotW / static_cast<double>(s.labels.size());
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    const double h = kPlotH * s.values[i] / top;
    const double x = kLeft + slot * (static_cast<double>(i) + 0.15);
    svg.raw(fmt::format(
        "<rect class=\"bar\" data-category=\"{}\" data-value=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" "
        "fill=\"{}\"/>\n",
        esc(s.labels[i]), format_value(s.values[i]), num(x), num(kTop + kPlotH - h), num(slot * 0.7), num(h),
        color(i)));
    svg.text(x + slot * 0.35, kTop + kPlotH + 14, s.labels[i]);
  }
  return svg.finish();
}

std::string horizontal_bar(const ChartSpec& spec) {
  const auto& s = need<CategorySeries>(spec, "one category series");
  check_series(s);
  Svg svg(spec);
  const double top = std::max(max_of(s.values), 1e-12);
  svg.line(kLeft, kTop, kLeft, kTop + kPlotH);
  svg.x_axis();
  const double slot = kPlotH / static_cast<double>(s.labels.size());
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    const double w = kPlotW * s.values[i] / top;
    const double y = kTop + slot * (static_cast<double>(i) + 0.15);
    svg.raw(fmt::format(
        "<rect class=\"bar\" data-category=\"{}\" data-value=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" "
        "fill=\"{}\"/>\n",
        esc(s.labels[i]), format_value(s.values[i]), num(kLeft), num(y), num(w), num(slot * 0.7), color(i)));
    svg.text(kLeft - 6, y + slot * 0.35 + 4, s.labels[i], "end");
  }
  for (int t = 0; t <= 4; ++t) {
    const double x = kLeft + kPlotW * t / 4.0;
    svg.text(x, kTop + kPlotH + 14, format_value(top * t / 4.0), "middle", "tick-label");
  }
  return svg.finish();
}

std::string pie(const ChartSpec& spec) {
  const auto& s = need<CategorySeries>(spec, "one category series");
  check_series(s);
  double total = 0;
  std::size_t nonzero = 0;
  for (double v : s.values) {
    total += v;
    nonzero += v > 0 ? 1 : 0;
  }
  if (total <= 0) throw Error(Errc::EmptyData, "all pie values are zero");
  Svg svg(spec);
  const double cx = kLeft + kPlotW / 2, cy = kTop + kPlotH / 2, r = kPlotH / 2 - 4;
  double angle = -std::numbers::pi / 2;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    if (s.values[i] <= 0) continue;
    const double frac = s.values[i] / total;
    if (nonzero == 1) {
      svg.raw(fmt::format("<circle class=\"wedge\" data-category=\"{}\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>\n",
                          esc(s.labels[i]), num(cx), num(cy), num(r), color(i)));
    } else {
      const double a2 = angle + 2 * std::numbers::pi * frac;
      svg.raw(fmt::format(
          "<path class=\"wedge\" data-category=\"{}\" d=\"M {} {} L {} {} A {} {} 0 {} 1 {} {} Z\" fill=\"{}\" "
          "stroke=\"#fff\"/>\n",
          esc(s.labels[i]), num(cx), num(cy), num(cx + r * std::cos(angle)), num(cy + r * std::sin(angle)), num(r),
          num(r), frac > 0.5 ? 1 : 0, num(cx + r * std::cos(a2)), num(cy + r * std::sin(a2)), color(i)));
      angle = a2;
    }
  }
  // Legend.
  double ly = kTop;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    svg.text(kWidth - kRight - 4, ly + 10,
             fmt::format("{} ({})", s.labels[i], format_value(100 * s.values[i] / total) + "%"), "end", "legend");
    ly += 16;
  }
  return svg.finish();
}

struct Tile {
  std::size_t index;
  double area;
};

double worst_ratio(const std::vector<Tile>& row, double side) {
  double sum = 0, lo = INFINITY, hi = 0;
  for (const auto& t : row) {
    sum += t.area;
    lo = std::min(lo, t.area);
    hi = std::max(hi, t.area);
  }
  const double s2 = side * side, sum2 = sum * sum;
  return std::max(s2 * hi / sum2, sum2 / (s2 * lo));
}

std::string treemap(const ChartSpec& spec) {
  const auto& s = need<CategorySeries>(spec, "one category series");
  check_series(s);
  double total = 0;
  for (double v : s.values) total += v;
  if (total <= 0) throw Error(Errc::EmptyData, "all treemap values are zero");
  std::vector<Tile> items;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    if (s.values[i] > 0) items.push_back({i, s.values[i] / total * kPlotW * kPlotH});
  }
  std::stable_sort(items.begin(), items.end(), [&](const Tile& a, const Tile& b) {
    if (a.area != b.area) return a.area > b.area;
    return s.labels[a.index] < s.labels[b.index];
  });
  Svg svg(spec);
  double x = kLeft, y = kTop, w = kPlotW, h = kPlotH;
  std::size_t next = 0;
  auto emit = [&](const Tile& t, double tx, double ty, double tw, double th) {
    svg.raw(fmt::format(
        "<rect class=\"tile\" data-category=\"{}\" data-value=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" "
        "fill=\"{}\" stroke=\"#fff\"/>\n",
        esc(s.labels[t.index]), format_value(s.values[t.index]), num(tx), num(ty), num(tw), num(th), color(t.index)));
    if (tw > 30 && th > 14) svg.text(tx + tw / 2, ty + th / 2 + 4, s.labels[t.index]);
  };
  while (next < items.size()) {
    const double side = std::min(w, h);
    std::vector<Tile> row{items[next++]};
    while (next < items.size()) {
      auto candidate = row;
      candidate.push_back(items[next]);
      if (worst_ratio(candidate, side) > worst_ratio(row, side)) break;
      row = std::move(candidate);
      ++next;
    }
    double sum = 0;
    for (const auto& t : row) sum += t.area;
    if (w >= h) {
      const double col_w = sum / h;
      double ty = y;
      for (const auto& t : row) {
        const double th = t.area / col_w;
        emit(t, x, ty, col_w, th);
        ty += th;
      }
      x += col_w;
      w -= col_w;
    } else {
      const double row_h = sum / w;
      double tx = x;
      for (const auto& t : row) {
        const double tw = t.area / row_h;
        emit(t, tx, y, tw, row_h);
        tx += tw;
      }
      y += row_h;
      h -= row_h;
    }
  }
  return svg.finish();
}

// White to blue by t in [0, 1].
std::string sequential(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const auto ch = [t](int from, int to) { return static_cast<int>(std::lround(from + (to - from) * t)); };
  return fmt::format("#{:02x}{:02x}{:02x}", ch(247, 33), ch(251, 102), ch(255, 172));
}

// Red (-1) through white (0) to blue (+1).
std::string diverging(double v) {
  v = std::clamp(v, -1.0, 1.0);
  const double t = std::abs(v);
  const auto ch = [t](int to) { return static_cast<int>(std::lround(255 + (to - 255) * t)); };
  return v >= 0 ? fmt::format("#{:02x}{:02x}{:02x}", ch(33), ch(102), ch(172))
                : fmt::format("#{:02x}{:02x}{:02x}", ch(178), ch(24), ch(43));
}

std::string grid(const ChartSpec& spec, const std::vector<std::string>& rows, const std::vector<std::string>& cols,
                 const std::vector<std::vector<double>>& values, bool correlation) {
  Svg svg(spec);
  double top = 0;
  for (const auto& r : values) top = std::max(top, max_of(r));
  const double cw = kPlotW / static_cast<double>(cols.size());
  const double ch = kPlotH / static_cast<double>(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    svg.text(kLeft - 6, kTop + ch * (static_cast<double>(i) + 0.5) + 4, rows[i], "end");
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double v = values[i][j];
      const auto fill = correlation ? diverging(v) : sequential(top > 0 ? v / top : 0);
      const double x = kLeft + cw * static_cast<double>(j), y = kTop + ch * static_cast<double>(i);
      svg.raw(fmt::format(
          "<rect class=\"cell\" data-row=\"{}\" data-col=\"{}\" data-value=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" "
          "height=\"{}\" fill=\"{}\" stroke=\"#fff\"/>\n",
          esc(rows[i]), esc(cols[j]), format_value(v), num(x), num(y), num(cw), num(ch), fill));
      if (cw > 28 && ch > 14) svg.text(x + cw / 2, y + ch / 2 + 4, format_value(v), "middle", "cell-label");
    }
  }
  for (std::size_t j = 0; j < cols.size(); ++j) {
    svg.text(kLeft + cw * (static_cast<double>(j) + 0.5), kTop + kPlotH + 14, cols[j]);
  }
  return svg.finish();
}

std::string heatmap(const ChartSpec& spec) {
  if (const auto* s = std::get_if<CategorySeries>(&spec.data)) {
    check_series(*s);
    return grid(spec, {"count"}, s->labels, {s->values}, false);
  }
  const auto& c = need<CrossTab>(spec, "a category series or a cross-tabulation");
  check_crosstab(c);
  return grid(spec, c.rows, c.cols, c.counts, false);
}

std::string correlation_heatmap(const ChartSpec& spec) {
  const auto& m = need<Matrix>(spec, "a square correlation matrix");
  if (m.labels.empty()) throw Error(Errc::EmptyData, "empty correlation matrix");
  if (m.values.size() != m.labels.size()) arity(spec, "a square correlation matrix");
  for (const auto& row : m.values) {
    if (row.size() != m.labels.size()) arity(spec, "a square correlation matrix");
    for (double v : row) {
      if (!(v >= -1 && v <= 1)) throw Error(Errc::InvalidArgument, "correlation entries must lie in [-1, 1]");
    }
  }
  return grid(spec, m.labels, m.labels, m.values, true);
}

std::string stacked_or_grouped(const ChartSpec& spec, bool stacked) {
  const auto& c = need<CrossTab>(spec, "two categorical columns");
  check_crosstab(c);
  Svg svg(spec);
  double top = 0;
  for (const auto& row : c.counts) {
    top = std::max(top, stacked ? std::accumulate(row.begin(), row.end(), 0.0) : max_of(row));
  }
  top = std::max(top, 1e-12);
  svg.y_axis(0, top);
  svg.x_axis();
  const double slot = kPlotW / static_cast<double>(c.rows.size());
  const double inner = slot * 0.7;
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    const double x0 = kLeft + slot * (static_cast<double>(i) + 0.15);
    double base = kTop + kPlotH;
    for (std::size_t j = 0; j < c.cols.size(); ++j) {
      const double h = kPlotH * c.counts[i][j] / top;
      double x = x0, w = inner, y = base - h;
      if (stacked) {
        base -= h;
      } else {
        w = inner / static_cast<double>(c.cols.size());
        x = x0 + w * static_cast<double>(j);
        y = kTop + kPlotH - h;
      }
      svg.raw(fmt::format(
          "<rect class=\"{}\" data-category=\"{}\" data-series=\"{}\" data-value=\"{}\" x=\"{}\" y=\"{}\" "
          "width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
          stacked ? "segment" : "bar", esc(c.rows[i]), esc(c.cols[j]), format_value(c.counts[i][j]), num(x), num(y),
          num(w), num(h), color(j)));
    }
    svg.text(x0 + inner / 2, kTop + kPlotH + 14, c.rows[i]);
  }
  for (std::size_t j = 0; j < c.cols.size(); ++j) {
    const double ly = kTop + 16.0 * static_cast<double>(j);
    svg.raw(fmt::format("<circle class=\"legend\" cx=\"{}\" cy=\"{}\" r=\"5\" fill=\"{}\"/>\n", num(kWidth - 120),
                        num(ly + 6), color(j)));
    svg.text(kWidth - 110, ly + 10, c.cols[j], "start", "legend");
  }
  return svg.finish();
}

std::string box(const ChartSpec& spec) {
  const auto& g = need<GroupedSamples>(spec, "one categorical and one numerical series");
  if (g.groups.empty()) throw Error(Errc::EmptyData, "no groups to draw");
  if (g.groups.size() != g.samples.size()) throw Error(Errc::ArityMismatch, "groups and samples differ in length");
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < g.samples.size(); ++i) {
    if (g.samples[i].empty()) {
      throw Error(Errc::EmptyData, fmt::format("group '{}' has no numerical values", g.groups[i]));
    }
    for (double v : g.samples[i]) {
      if (!std::isfinite(v)) throw Error(Errc::InvalidArgument, "box plot values must be finite");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (lo == hi) {
    lo -= 1;
    hi += 1;
  }
  Svg svg(spec);
  svg.y_axis(lo, hi);
  svg.x_axis();
  const auto y_of = [&](double v) { return kTop + kPlotH - kPlotH * (v - lo) / (hi - lo); };
  const double slot = kPlotW / static_cast<double>(g.groups.size());
  for (std::size_t i = 0; i < g.groups.size(); ++i) {
    auto sorted = g.samples[i];
    std::sort(sorted.begin(), sorted.end());
    const double q1 = stats::quantile_sorted(sorted, 0.25);
    const double q2 = stats::quantile_sorted(sorted, 0.5);
    const double q3 = stats::quantile_sorted(sorted, 0.75);
    const double iqr = q3 - q1;
    double wlo = q1, whi = q3;
    for (double v : sorted) {
      if (v >= q1 - 1.5 * iqr) {
        wlo = v;
        break;
      }
    }
    for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
      if (*it <= q3 + 1.5 * iqr) {
        whi = *it;
        break;
      }
    }
    const double cx = kLeft + slot * (static_cast<double>(i) + 0.5);
    const double bw = std::min(60.0, slot * 0.5);
    svg.line(cx, y_of(wlo), cx, y_of(q1), "whisker");
    svg.line(cx, y_of(q3), cx, y_of(whi), "whisker");
    svg.line(cx - bw / 4, y_of(wlo), cx + bw / 4, y_of(wlo), "whisker-cap");
    svg.line(cx - bw / 4, y_of(whi), cx + bw / 4, y_of(whi), "whisker-cap");
    svg.raw(fmt::format(
        "<rect class=\"box\" data-category=\"{}\" data-q1=\"{}\" data-median=\"{}\" data-q3=\"{}\" x=\"{}\" y=\"{}\" "
        "width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#333\"/>\n",
        esc(g.groups[i]), format_value(q1), format_value(q2), format_value(q3), num(cx - bw / 2), num(y_of(q3)),
        num(bw), num(y_of(q1) - y_of(q3)), color(i)));
    svg.line(cx - bw / 2, y_of(q2), cx + bw / 2, y_of(q2), "median");
    for (double v : sorted) {
      if (v < wlo || v > whi) {
        svg.raw(fmt::format("<circle class=\"outlier\" cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"none\" stroke=\"#333\"/>\n",
                            num(cx), num(y_of(v))));
      }
    }
    svg.text(cx, kTop + kPlotH + 14, g.groups[i]);
  }
  return svg.finish();
}

// Counts per category, or 10 equal-width bins for a numerical column.
CategorySeries counts_of(const tabular::Column& c) {
  CategorySeries s;
  if (!c.is_numerical()) {
    std::map<std::string, double> counts;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!c.is_missing(i)) counts[c.text(i)] += 1;
    }
    for (const auto& [k, v] : counts) {
      s.labels.push_back(k);
      s.values.push_back(v);
    }
    return s;
  }
  const auto xs = c.observed_numbers();
  if (xs.empty()) return s;
  const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
  const double lo = *lo_it, hi = *hi_it;
  if (lo == hi) {
    s.labels.push_back(format_value(lo));
    s.values.push_back(static_cast<double>(xs.size()));
    return s;
  }
  constexpr int kBins = 10;
  const double width = (hi - lo) / kBins;
  s.values.assign(kBins, 0.0);
  for (double x : xs) s.values[std::min(kBins - 1, static_cast<int>((x - lo) / width))] += 1;
  for (int b = 0; b < kBins; ++b) {
    s.labels.push_back(fmt::format("[{}, {}{}", format_value(lo + width * b), format_value(lo + width * (b + 1)),
                                   b == kBins - 1 ? "]" : ")"));
  }
  return s;
}

CrossTab crosstab_of(const tabular::Column& a, const tabular::Column& b) {
  std::map<std::string, std::map<std::string, double>> cells;
  std::map<std::string, std::size_t> col_index;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.is_missing(i) || b.is_missing(i)) continue;
    cells[a.text(i)][b.text(i)] += 1;
    col_index.emplace(b.text(i), 0);
  }
  CrossTab t;
  for (auto& [k, idx] : col_index) {
    idx = t.cols.size();
    t.cols.push_back(k);
  }
  for (const auto& [row, counts] : cells) {
    t.rows.push_back(row);
    std::vector<double> r(t.cols.size(), 0.0);
    for (const auto& [col, v] : counts) r[col_index.at(col)] = v;
    t.counts.push_back(std::move(r));
  }
  return t;
}

double pearson(const tabular::Column& a, const tabular::Column& b) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.is_missing(i) || b.is_missing(i)) continue;
    x.push_back(a.number(i));
    y.push_back(b.number(i));
  }
  if (x.size() < 2) throw Error(Errc::EmptyData, "fewer than two complete pairs");
  const double mx = stats::mean(x), my = stats::mean(y);
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw Error(Errc::ConstantColumn, "correlation with a constant column");
  return std::clamp(static_cast<double>(sxy / std::sqrt(sxx * syy)), -1.0, 1.0);
}

}  // namespace

std::string_view to_string(ChartKind k) noexcept { return kKinds[static_cast<std::size_t>(k)].name; }

std::optional<ChartKind> chart_kind_from_string(std::string_view s) noexcept {
  for (const auto& k : kKinds) {
    if (k.name == s) return k.kind;
  }
  return std::nullopt;
}

std::string_view tool_name(ChartKind k) noexcept { return kKinds[static_cast<std::size_t>(k)].tool; }

std::optional<ChartKind> chart_kind_from_tool(std::string_view tool) noexcept {
  for (const auto& k : kKinds) {
    if (k.tool == tool) return k.kind;
  }
  return std::nullopt;
}

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0) return "0";
  return fmt::format("{:.4g}", v);
}

std::string render_svg(const ChartSpec& spec) {
  switch (spec.kind) {
    case ChartKind::Bar: return bar(spec);
    case ChartKind::Pie: return pie(spec);
    case ChartKind::HorizontalBar: return horizontal_bar(spec);
    case ChartKind::Treemap: return treemap(spec);
    case ChartKind::Heatmap: return heatmap(spec);
    case ChartKind::CorrelationHeatmap: return correlation_heatmap(spec);
    case ChartKind::StackedBar: return stacked_or_grouped(spec, true);
    case ChartKind::GroupedBar: return stacked_or_grouped(spec, false);
    case ChartKind::Box: return box(spec);
  }
  throw Error(Errc::InvalidArgument, "unknown chart kind");
}

void render_chart(const ChartSpec& spec, const std::filesystem::path& out) {
  const auto svg = render_svg(spec);
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, fmt::format("cannot write '{}'", out.string()));
  f << svg;
}

ChartSpec chart_for_columns(ChartKind kind, const tabular::Table& table, std::span<const std::string> columns) {
  std::vector<const tabular::Column*> cols;
  for (const auto& name : columns) cols.push_back(&table.column(name));
  ChartSpec spec;
  spec.kind = kind;
  std::string joined;
  for (const auto* c : cols) joined += (joined.empty() ? "" : " x ") + c->name();
  auto mismatch = [&](std::string_view want) {
    throw Error(Errc::ArityMismatch, fmt::format("{} chart needs {}, got {} column(s)", to_string(kind), want,
                                                 cols.size()));
  };
  switch (kind) {
    case ChartKind::Bar:
    case ChartKind::Pie:
    case ChartKind::HorizontalBar:
    case ChartKind::Treemap:
      if (cols.size() != 1) mismatch("one column");
      spec.data = counts_of(*cols[0]);
      spec.x_label = cols[0]->name();
      spec.y_label = "count";
      break;
    case ChartKind::Heatmap:
      if (cols.size() == 1) {
        spec.data = counts_of(*cols[0]);
        spec.x_label = cols[0]->name();
      } else if (cols.size() == 2 && !cols[0]->is_numerical() && !cols[1]->is_numerical()) {
        spec.data = crosstab_of(*cols[0], *cols[1]);
        spec.x_label = cols[1]->name();
        spec.y_label = cols[0]->name();
      } else {
        mismatch("one column or two categorical columns");
      }
      break;
    case ChartKind::CorrelationHeatmap: {
      if (cols.size() < 2) mismatch("at least two numerical columns");
      Matrix m;
      for (const auto* c : cols) {
        if (!c->is_numerical()) mismatch("numerical columns");
        m.labels.push_back(c->name());
      }
      m.values.assign(cols.size(), std::vector<double>(cols.size(), 1.0));
      for (std::size_t i = 0; i < cols.size(); ++i) {
        for (std::size_t j = i + 1; j < cols.size(); ++j) m.values[i][j] = m.values[j][i] = pearson(*cols[i], *cols[j]);
      }
      spec.data = std::move(m);
      break;
    }
    case ChartKind::StackedBar:
    case ChartKind::GroupedBar:
      if (cols.size() != 2 || cols[0]->is_numerical() || cols[1]->is_numerical()) mismatch("two categorical columns");
      spec.data = crosstab_of(*cols[0], *cols[1]);
      spec.x_label = cols[0]->name();
      spec.y_label = "count";
      break;
    case ChartKind::Box: {
      GroupedSamples g;
      if (cols.size() == 1 && cols[0]->is_numerical()) {
        g.groups.push_back(cols[0]->name());
        g.samples.push_back(cols[0]->observed_numbers());
        spec.y_label = cols[0]->name();
      } else if (cols.size() == 2 && cols[0]->is_numerical() != cols[1]->is_numerical()) {
        const auto* cat = cols[0]->is_numerical() ? cols[1] : cols[0];
        const auto* val = cols[0]->is_numerical() ? cols[0] : cols[1];
        std::map<std::string, std::vector<double>> by;
        for (std::size_t i = 0; i < cat->size(); ++i) {
          if (cat->is_missing(i) || val->is_missing(i)) continue;
          by[cat->text(i)].push_back(val->number(i));
        }
        for (auto& [k, v] : by) {
          g.groups.push_back(k);
          g.samples.push_back(std::move(v));
        }
        spec.x_label = cat->name();
        spec.y_label = val->name();
      } else {
        mismatch("one numerical column, or one categorical and one numerical column");
      }
      spec.data = std::move(g);
      break;
    }
  }
  spec.title = fmt::format("{} of {}", to_string(kind), joined);
  return spec;
}

ChartKind default_chart(metrics::Scenario s) noexcept {
  switch (s) {
    case metrics::Scenario::CatDist: return ChartKind::Bar;
    case metrics::Scenario::NumDist: return ChartKind::Box;
    case metrics::Scenario::CatCat: return ChartKind::StackedBar;
    case metrics::Scenario::CatNum: return ChartKind::Box;
    case metrics::Scenario::NumNum: return ChartKind::CorrelationHeatmap;
  }
  return ChartKind::Bar;
}

}  // namespace biasaudit::reporting
