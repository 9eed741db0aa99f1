// SPDX-License-Identifier: Apache-2.0
#include "biasaudit/severity.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "biasaudit/error.hpp"

namespace biasaudit::severity {

namespace {

constexpr std::array<std::string_view, 5> kLabels{"most balanced", "balanced", "moderately biased", "biased",
                                                  "most biased"};
constexpr double kInf = std::numeric_limits<double>::infinity();

ThresholdEntry higher(std::string id, std::string key, std::array<double, 4> cuts) {
  return {std::move(id), std::move(key), Direction::HigherIsMoreBiased, 0.0, cuts};
}

ThresholdEntry deviation(std::string id, std::string key, double target, std::array<double, 4> cuts) {
  return {std::move(id), std::move(key), Direction::DeviationFromTarget, target, cuts};
}

void check_entry(const ThresholdEntry& e) {
  metrics::scenario_of(e.metric_id);
  for (std::size_t i = 0; i < 4; ++i) {
    if (!std::isfinite(e.cuts[i])) {
      throw Error(Errc::InvalidArgument, fmt::format("{}: cut-points must be finite", e.metric_id));
    }
    if (i > 0 && !(e.cuts[i] > e.cuts[i - 1])) {
      throw Error(Errc::InvalidArgument, fmt::format("{}: cut-points must be strictly increasing", e.metric_id));
    }
  }
  if (e.raw_key.empty()) throw Error(Errc::InvalidArgument, fmt::format("{}: empty raw key", e.metric_id));
}

std::string_view direction_name(Direction d) {
  return d == Direction::HigherIsMoreBiased ? "higher_is_more_biased" : "deviation_from_target";
}

}  // namespace

std::string_view level_label(int level) {
  if (level < 1 || level > 5) throw Error(Errc::InvalidArgument, fmt::format("bias level {} outside 1..5", level));
  return kLabels[static_cast<std::size_t>(level - 1)];
}

std::string_view BiasLevel::label() const { return level_label(value); }

double ThresholdEntry::transform(double raw) const {
  return direction == Direction::HigherIsMoreBiased ? raw : std::abs(raw - target);
}

int ThresholdEntry::level_of(double v) const {
  if (v == kInf) return 5;
  int level = 1;
  for (double c : cuts) {
    if (c < v) ++level;
  }
  return level;
}

ThresholdTable::ThresholdTable(std::string version, std::vector<ThresholdEntry> entries) : version_(std::move(version)) {
  for (auto& e : entries) {
    check_entry(e);
    const auto id = e.metric_id;
    if (!entries_.emplace(id, std::move(e)).second) {
      throw Error(Errc::InvalidArgument, fmt::format("duplicate threshold entry '{}'", id));
    }
  }
  for (const auto& id : metrics::all_metric_ids()) {
    if (!entries_.contains(id)) throw Error(Errc::InvalidArgument, fmt::format("no threshold entry for '{}'", id));
  }
}

const ThresholdTable& ThresholdTable::defaults() {
  static const ThresholdTable table = [] {
    const std::array<double, 4> balance{0.1, 0.25, 0.5, 0.75};
    const std::array<double, 4> d_family{0.1, 0.25, 0.5, 1.0};
    const std::array<double, 4> gaps{0.05, 0.1, 0.2, 0.35};
    const std::array<double, 4> assoc{0.1, 0.25, 0.45, 0.65};
    const std::array<double, 4> information{0.05, 0.15, 0.3, 0.5};
    return ThresholdTable("default-v1",
                          {
                              deviation("shannon_balance", "balance", 1.0, balance),
                              higher("max_min_ratio", "ratio", {1.5, 3, 10, 100}),
                              deviation("entropy", "H_norm", 1.0, balance),
                              deviation("gini", "G_norm", 1.0, balance),
                              higher("relative_risk", "rr_dev_max", d_family),
                              deviation("skewness", "g1", 0.0, {0.5, 1, 2, 3}),
                              deviation("kurtosis", "g2", 0.0, {1, 2, 4, 7}),
                              higher("outlier", "fraction", {0.005, 0.01, 0.03, 0.05}),
                              deviation("cohens_d_mad", "d", 0.0, d_family),
                              higher("quantile_deviation", "deviation", gaps),
                              higher("cramers_v", "V", assoc),
                              higher("elift", "elift_max", {1.1, 1.5, 2, 3}),
                              higher("statistical_parity", "delta_max", gaps),
                              higher("lipschitz", "L", gaps),
                              higher("total_variation", "tvd_max", gaps),
                              higher("max_abs_mean", "N", d_family),
                              higher("cohens_d", "d_max", d_family),
                              higher("standardized_difference", "sd_max", d_family),
                              deviation("causal_effect", "ACE_std", 0.0, d_family),
                              higher("pse", "pse", d_family),
                              deviation("pearson", "r", 0.0, {0.1, 0.3, 0.5, 0.7}),
                              higher("nmi", "NMI", information),
                              higher("hgr_approximation", "hgr", assoc),
                              higher("wasserstein", "W2", d_family),
                              higher("hsic", "nHSIC", information),
                          });
  }();
  return table;
}

const ThresholdEntry& ThresholdTable::entry(std::string_view metric_id) const {
  auto it = entries_.find(metric_id);
  if (it == entries_.end()) {
    throw Error(Errc::UnknownMetric, fmt::format("no threshold entry for metric '{}'", metric_id));
  }
  return it->second;
}

std::vector<ThresholdEntry> ThresholdTable::entries() const {
  std::vector<ThresholdEntry> out;
  for (const auto& id : metrics::all_metric_ids()) {
    if (auto it = entries_.find(id); it != entries_.end()) out.push_back(it->second);
  }
  return out;
}

ThresholdTable ThresholdTable::with_entry(ThresholdEntry e) const {
  check_entry(e);
  ThresholdTable t = *this;
  const auto id = e.metric_id;
  t.entries_[id] = std::move(e);
  return t;
}

ThresholdTable ThresholdTable::with_version(std::string version) const {
  ThresholdTable t = *this;
  t.version_ = std::move(version);
  return t;
}

void to_json(nlohmann::json& j, const ThresholdTable& t) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : t.entries()) {
    nlohmann::json row{{"metric_id", e.metric_id},
                       {"raw_key", e.raw_key},
                       {"direction", std::string(direction_name(e.direction))},
                       {"cuts", e.cuts}};
    if (e.direction == Direction::DeviationFromTarget) row["target"] = e.target;
    entries.push_back(std::move(row));
  }
  j = nlohmann::json{{"version", t.version()}, {"entries", entries}};
}

void from_json(const nlohmann::json& j, ThresholdTable& t) {
  try {
    std::vector<ThresholdEntry> entries;
    for (const auto& row : j.at("entries")) {
      ThresholdEntry e;
      e.metric_id = row.at("metric_id").get<std::string>();
      e.raw_key = row.at("raw_key").get<std::string>();
      const auto dir = row.at("direction").get<std::string>();
      if (dir == direction_name(Direction::HigherIsMoreBiased)) {
        e.direction = Direction::HigherIsMoreBiased;
      } else if (dir == direction_name(Direction::DeviationFromTarget)) {
        e.direction = Direction::DeviationFromTarget;
        e.target = row.at("target").get<double>();
      } else {
        throw Error(Errc::InvalidArgument, fmt::format("{}: unknown direction '{}'", e.metric_id, dir));
      }
      e.cuts = row.at("cuts").get<std::array<double, 4>>();
      entries.push_back(std::move(e));
    }
    t = ThresholdTable(j.at("version").get<std::string>(), std::move(entries));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::InvalidArgument, fmt::format("malformed threshold table: {}", ex.what()));
  }
}

ThresholdTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, fmt::format("cannot open threshold table '{}'", path.string()));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::ParseError, fmt::format("{}: {}", path.string(), ex.what()));
  }
  return j.get<ThresholdTable>();
}

void save_table(const ThresholdTable& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, fmt::format("cannot write '{}'", path.string()));
  out << nlohmann::json(t).dump(2) << '\n';
}

BiasLevel map_to_level(std::string_view metric_id, const metrics::MetricResult& result, const ThresholdTable& table) {
  const auto& e = table.entry(metric_id);
  return BiasLevel{e.level_of(e.transform(result))};
}

double accuracy(const ThresholdEntry& e, std::span<const Observation> obs) {
  if (obs.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& o : obs) hit += e.level_of(o.value) == o.level ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(obs.size());
}

namespace {

struct Partition {
  std::size_t correct = 0;
  // Per sorted distinct value: its value and assigned level.
  std::vector<double> values;
  std::vector<int> levels;
};

// Maximum-accuracy monotone assignment of levels to the sorted distinct values.
Partition best_partition(std::span<const Observation> obs) {
  std::vector<Observation> sorted(obs.begin(), obs.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.value < b.value; });
  Partition p;
  std::vector<std::array<std::size_t, 5>> counts;
  for (const auto& o : sorted) {
    if (p.values.empty() || o.value != p.values.back()) {
      p.values.push_back(o.value);
      counts.push_back({});
    }
    counts.back()[static_cast<std::size_t>(o.level - 1)]++;
  }
  const std::size_t g = p.values.size();
  // best[i][l]: most hits on values 0..i with value i at level l+1.
  std::vector<std::array<std::size_t, 5>> best(g);
  std::vector<std::array<int, 5>> from(g);
  for (std::size_t i = 0; i < g; ++i) {
    std::size_t run = 0;
    int arg = 0;
    for (int l = 0; l < 5; ++l) {
      if (i > 0 && best[i - 1][l] > run) {
        run = best[i - 1][l];
        arg = l;
      }
      best[i][l] = run + counts[i][l];
      from[i][l] = arg;
    }
  }
  int l = 0;
  for (int c = 1; c < 5; ++c) {
    if (best[g - 1][c] > best[g - 1][l]) l = c;
  }
  p.correct = best[g - 1][l];
  p.levels.assign(g, 1);
  for (std::size_t i = g; i-- > 0;) {
    p.levels[i] = l + 1;
    if (i > 0) l = from[i][l];
  }
  return p;
}

// Cut-points realizing a partition, keeping current cuts wherever they are
// already consistent with it.
std::array<double, 4> cuts_for(const Partition& p, const std::array<double, 4>& current) {
  std::array<double, 4> low{}, high{};
  for (int j = 1; j <= 4; ++j) {
    low[j - 1] = -kInf;
    high[j - 1] = kInf;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      if (p.levels[i] <= j) {
        low[j - 1] = std::max(low[j - 1], p.values[i]);
      } else {
        high[j - 1] = std::min(high[j - 1], p.values[i]);
      }
    }
  }
  std::array<double, 4> out{};
  double prev = -kInf;
  for (std::size_t j = 0; j < 4; ++j) {
    const double lo = std::max(low[j], prev);
    const double hi = high[j];
    const double cur = current[j];
    if (cur >= low[j] && cur > prev && cur < hi && std::isfinite(cur)) {
      out[j] = cur;
    } else {
      std::size_t sharing = 0;
      for (std::size_t t = j; t < 4; ++t) sharing += high[t] == hi ? 1 : 0;
      double a = lo, b = hi;
      if (!std::isfinite(a) && !std::isfinite(b)) {
        a = -1.0;
        b = 1.0;
      } else if (!std::isfinite(a)) {
        a = b - std::max(1.0, std::abs(b));
      } else if (!std::isfinite(b)) {
        b = a + std::max(1.0, std::abs(a));
      }
      out[j] = a + (b - a) / static_cast<double>(sharing + 1);
    }
    prev = out[j];
  }
  return out;
}

bool strictly_increasing(const std::array<double, 4>& c) {
  return c[0] < c[1] && c[1] < c[2] && c[2] < c[3] && std::isfinite(c[0]) && std::isfinite(c[3]);
}

}  // namespace

ThresholdEntry calibrate_entry(const ThresholdEntry& initial, std::span<const Observation> obs) {
  if (obs.empty()) return initial;
  const Partition p = best_partition(obs);
  const double before = accuracy(initial, obs);
  const double optimum = static_cast<double>(p.correct) / static_cast<double>(obs.size());
  if (!(optimum > before)) return initial;
  ThresholdEntry e = initial;
  e.cuts = cuts_for(p, initial.cuts);
  if (!strictly_increasing(e.cuts) || !(accuracy(e, obs) > before)) return initial;
  return e;
}

void to_json(nlohmann::json& j, const CalibrationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& m : r.metrics) {
    rows.push_back({{"metric_id", m.metric_id},
                    {"cases", m.cases},
                    {"failed", m.failed},
                    {"accuracy_before", m.accuracy_before},
                    {"accuracy_after", m.accuracy_after},
                    {"cuts_before", m.cuts_before},
                    {"cuts_after", m.cuts_after},
                    {"separable", m.separable}});
  }
  j = nlohmann::json{{"version", r.table.version()},
                     {"accuracy_before", r.accuracy_before},
                     {"accuracy_after", r.accuracy_after},
                     {"headline_accuracy_before", r.headline_accuracy_before},
                     {"headline_accuracy_after", r.headline_accuracy_after},
                     {"inseparable", r.inseparable},
                     {"seconds", r.seconds},
                     {"metrics", rows}};
}

CaseValues evaluate_case(const synthgen::SuiteCase& c, const ThresholdTable& table) {
  const auto t = synthgen::generate(c.spec);
  std::vector<tabular::Column> cols;
  for (const auto& name : synthgen::feature_columns(c.spec.scenario)) cols.push_back(t.column(name));
  metrics::MetricOptions opts;
  if (c.spec.scenario == metrics::Scenario::CatNum) opts.mediator = t.column("mediator");
  CaseValues out;
  out.scenario = c.spec.scenario;
  out.level = c.level;
  for (const auto& id : metrics::metric_ids(c.spec.scenario)) {
    try {
      out.values[id] = table.entry(id).transform(metrics::detect(c.spec.scenario, cols, id, opts));
    } catch (const Error&) {
      // Left absent; counted as a miss during calibration.
    }
  }
  return out;
}

namespace {

// Headline accuracy: the case's predicted level is the maximum over metrics.
double headline_accuracy(std::span<const CaseValues> cases, const ThresholdTable& t) {
  if (cases.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& c : cases) {
    int level = 0;
    for (const auto& [id, v] : c.values) level = std::max(level, t.entry(id).level_of(v));
    hit += level == c.level ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(cases.size());
}

}  // namespace

CalibrationReport calibrate(std::span<const CaseValues> cases, const ThresholdTable& initial) {
  // metric -> observations, plus case counts per level.
  std::map<std::string, std::vector<Observation>> obs;
  std::map<std::string, std::array<std::size_t, 5>> per_level;
  for (const auto& c : cases) {
    if (c.level < 1 || c.level > 5) throw Error(Errc::PreconditionFailed, "suite level outside 1..5");
    for (const auto& id : metrics::metric_ids(c.scenario)) {
      per_level[id][static_cast<std::size_t>(c.level - 1)]++;
      if (auto it = c.values.find(id); it != c.values.end()) obs[id].push_back({it->second, c.level});
    }
  }
  if (per_level.empty()) throw Error(Errc::PreconditionFailed, "empty calibration suite");
  for (const auto& [id, counts] : per_level) {
    for (std::size_t l = 0; l < 5; ++l) {
      if (counts[l] < 3) {
        throw Error(Errc::PreconditionFailed,
                    fmt::format("{}: level {} has {} replicate(s), need >= 3", id, l + 1, counts[l]));
      }
    }
  }

  CalibrationReport report;
  ThresholdTable table = initial;
  std::size_t total = 0, hits_before = 0, hits_after = 0;
  for (const auto& id : metrics::all_metric_ids()) {
    auto pl = per_level.find(id);
    if (pl == per_level.end()) continue;
    std::size_t cases_for_metric = 0;
    for (auto c : pl->second) cases_for_metric += c;
    const auto& o = obs[id];
    const auto& before = initial.entry(id);
    const auto after = calibrate_entry(before, o);
    table = table.with_entry(after);

    MetricCalibration m;
    m.metric_id = id;
    m.cases = cases_for_metric;
    m.failed = cases_for_metric - o.size();
    const double scale = o.empty() ? 0.0 : static_cast<double>(o.size()) / static_cast<double>(cases_for_metric);
    m.accuracy_before = accuracy(before, o) * scale;
    m.accuracy_after = accuracy(after, o) * scale;
    m.cuts_before = before.cuts;
    m.cuts_after = after.cuts;
    m.separable = m.failed == 0 && !o.empty() && best_partition(o).correct == o.size();
    if (!m.separable) report.inseparable.push_back(id);
    total += cases_for_metric;
    hits_before += static_cast<std::size_t>(std::lround(m.accuracy_before * static_cast<double>(cases_for_metric)));
    hits_after += static_cast<std::size_t>(std::lround(m.accuracy_after * static_cast<double>(cases_for_metric)));
    report.metrics.push_back(m);
  }
  report.accuracy_before = static_cast<double>(hits_before) / static_cast<double>(total);
  report.accuracy_after = static_cast<double>(hits_after) / static_cast<double>(total);
  report.headline_accuracy_before = headline_accuracy(cases, initial);
  report.headline_accuracy_after = headline_accuracy(cases, table);
  report.table = table == initial ? initial : table.with_version(initial.version() + "+calibrated");
  return report;
}

CalibrationReport calibrate(std::span<const synthgen::SuiteCase> suite, const ThresholdTable& initial,
                            unsigned jobs) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<CaseValues> values(suite.size());
  std::vector<std::exception_ptr> errors(suite.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < suite.size(); i = next++) {
      try {
        values[i] = evaluate_case(suite[i], initial);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(suite.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  auto report = calibrate(std::span<const CaseValues>(values), initial);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace biasaudit::severity
