// SPDX-License-Identifier: Apache-2.0
#include "biasaudit/tabular.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "biasaudit/error.hpp"
#include "stats.hpp"

namespace biasaudit::tabular {

namespace {

constexpr double kNumericParseShare = 0.95;
constexpr std::size_t kLowCardinality = 10;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_na(std::string_view cell, const TokenSet& na_tokens) {
  return na_tokens.contains(trim(cell));
}

std::string read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(Errc::FileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// RFC 4180 style records: quoted fields may hold delimiters, doubled quotes
// and newlines. Tracks the 1-based line of each record for diagnostics.
struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

std::vector<Record> split_records(std::string_view text, char delim) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<Record> records;
  Record current;
  std::string field;
  std::size_t line = 1;
  current.line = line;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t quote_line = 0;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // A line holding nothing at all is skipped rather than read as one empty cell.
    if (!(current.fields.size() == 1 && current.fields[0].empty())) {
      records.push_back(std::move(current));
    }
    current = Record{};
    current.line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
      quote_line = line;
    } else if (c == delim) {
      end_field();
    } else if (c == '\r') {
      // tolerated before '\n'
    } else if (c == '\n') {
      ++line;
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) {
    throw Error(Errc::ParseError,
                fmt::format("unterminated quoted field starting at line {}, column {}", quote_line,
                            current.fields.size() + 1));
  }
  if (field_started || !field.empty() || !current.fields.empty()) end_record();
  return records;
}

void check_unique(const std::vector<std::string>& names) {
  std::unordered_set<std::string> seen;
  for (const auto& name : names) {
    if (!seen.insert(name).second) throw Error(Errc::DuplicateHeader, "duplicate column name '" + name + "'");
  }
}

bool needs_quotes(std::string_view s, char delim) {
  return s.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string_view::npos;
}

void append_cell(std::string& out, std::string_view cell, char delim) {
  if (!needs_quotes(cell, delim)) {
    out.append(cell);
    return;
  }
  out.push_back('"');
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

}  // namespace

std::string_view to_string(ColumnKind kind) noexcept {
  return kind == ColumnKind::Numerical ? "numerical" : "categorical";
}

const TokenSet& default_na_tokens() {
  static const TokenSet tokens{"", "NA", "N/A", "?", "null"};
  return tokens;
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_number(double value) {
  if (value == 0.0) return "0";  // folds -0
  return fmt::format("{}", value);
}

// ---------------------------------------------------------------- Column

Column Column::from_text(std::string name, std::vector<std::string> raw, const TokenSet& na_tokens) {
  const ColumnKind kind = infer_kind(raw, na_tokens);
  return with_kind(std::move(name), kind, std::move(raw), na_tokens);
}

Column Column::with_kind(std::string name, ColumnKind kind, std::vector<std::string> raw,
                         const TokenSet& na_tokens) {
  Column col;
  col.name_ = std::move(name);
  col.kind_ = kind;
  col.missing_.assign(raw.size(), 0);
  if (kind == ColumnKind::Numerical) {
    col.numbers_.assign(raw.size(), std::numeric_limits<double>::quiet_NaN());
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (is_na(raw[i], na_tokens)) {
      col.missing_[i] = 1;
      continue;
    }
    if (kind == ColumnKind::Numerical) {
      if (auto v = parse_number(raw[i])) {
        col.numbers_[i] = *v;
      } else {
        col.missing_[i] = 1;
      }
    }
  }
  col.raw_ = std::move(raw);
  return col;
}

Column Column::categorical(std::string name, const std::vector<std::optional<std::string>>& values) {
  Column col;
  col.name_ = std::move(name);
  col.kind_ = ColumnKind::Categorical;
  col.raw_.reserve(values.size());
  col.missing_.reserve(values.size());
  for (const auto& v : values) {
    col.raw_.push_back(v.value_or(""));
    col.missing_.push_back(v ? 0 : 1);
  }
  return col;
}

Column Column::numerical(std::string name, const std::vector<std::optional<double>>& values) {
  Column col;
  col.name_ = std::move(name);
  col.kind_ = ColumnKind::Numerical;
  col.raw_.reserve(values.size());
  col.missing_.reserve(values.size());
  col.numbers_.reserve(values.size());
  for (const auto& v : values) {
    const bool ok = v && std::isfinite(*v);
    col.raw_.push_back(ok ? format_number(*v) : "");
    col.missing_.push_back(ok ? 0 : 1);
    col.numbers_.push_back(ok ? *v : std::numeric_limits<double>::quiet_NaN());
  }
  return col;
}

double Column::number(std::size_t row) const {
  if (kind_ != ColumnKind::Numerical) return std::numeric_limits<double>::quiet_NaN();
  return numbers_[row];
}

std::size_t Column::missing_count() const noexcept {
  return static_cast<std::size_t>(std::count(missing_.begin(), missing_.end(), 1));
}

std::vector<std::string> Column::categories() const {
  std::set<std::string> distinct;
  for (std::size_t i = 0; i < raw_.size(); ++i) {
    if (!missing_[i]) distinct.insert(raw_[i]);
  }
  return {distinct.begin(), distinct.end()};
}

std::vector<double> Column::observed_numbers() const {
  std::vector<double> out;
  if (kind_ != ColumnKind::Numerical) return out;
  out.reserve(numbers_.size());
  for (std::size_t i = 0; i < numbers_.size(); ++i) {
    if (!missing_[i]) out.push_back(numbers_[i]);
  }
  return out;
}

Column Column::renamed(std::string name) const {
  Column copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

Column Column::take(std::span<const std::size_t> rows) const {
  Column out;
  out.name_ = name_;
  out.kind_ = kind_;
  out.raw_.reserve(rows.size());
  out.missing_.reserve(rows.size());
  for (std::size_t r : rows) {
    out.raw_.push_back(raw_[r]);
    out.missing_.push_back(missing_[r]);
    if (kind_ == ColumnKind::Numerical) out.numbers_.push_back(numbers_[r]);
  }
  return out;
}

// ---------------------------------------------------------------- Table

Table::Table(std::string name, std::vector<Column> columns) : name_(std::move(name)), columns_(std::move(columns)) {
  std::vector<std::string> names;
  for (const auto& c : columns_) names.push_back(c.name());
  check_unique(names);
  row_count_ = columns_.empty() ? 0 : columns_.front().size();
  for (const auto& c : columns_) {
    if (c.size() != row_count_) {
      throw Error(Errc::InvalidArgument,
                  fmt::format("column '{}' has {} cells, expected {}", c.name(), c.size(), row_count_));
    }
  }
}

std::vector<std::string> Table::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns_.size());
  for (const auto& c : columns_) names.push_back(c.name());
  return names;
}

bool Table::has_column(std::string_view name) const noexcept {
  return std::any_of(columns_.begin(), columns_.end(), [&](const Column& c) { return c.name() == name; });
}

const Column& Table::column(std::string_view name) const {
  for (const auto& c : columns_) {
    if (c.name() == name) return c;
  }
  throw Error(Errc::UnknownColumn, fmt::format("no column named '{}' in table '{}'", name, name_));
}

Table Table::with_metadata(std::string key, std::string value) const {
  Table copy = *this;
  copy.metadata_[std::move(key)] = std::move(value);
  return copy;
}

Table Table::renamed(std::string name) const {
  Table copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

// ---------------------------------------------------------------- operations

ColumnKind infer_kind(std::span<const std::string> values, const TokenSet& na_tokens) {
  std::size_t present = 0;
  std::size_t parsed = 0;
  bool non_integer = false;
  std::set<double> distinct;
  for (const auto& v : values) {
    if (is_na(v, na_tokens)) continue;
    ++present;
    if (auto x = parse_number(v)) {
      ++parsed;
      if (std::floor(*x) != *x) non_integer = true;
      if (distinct.size() <= kLowCardinality) distinct.insert(*x);
    }
  }
  if (present == 0) return ColumnKind::Categorical;
  const bool mostly_numeric = static_cast<double>(parsed) >= kNumericParseShare * static_cast<double>(present);
  if (mostly_numeric && (distinct.size() > kLowCardinality || non_integer)) return ColumnKind::Numerical;
  return ColumnKind::Categorical;
}

std::vector<std::string> list_features(const std::filesystem::path& path, const CsvOptions& options) {
  const std::string text = read_file(path);
  // Only the header is needed, but quoted newlines force a real parse of it.
  const auto records = split_records(text, options.delimiter);
  if (records.empty()) throw Error(Errc::EmptyFile, path.string() + " has no header row");
  check_unique(records.front().fields);
  return records.front().fields;
}

Table parse_table(std::string_view text, std::string name, const CsvOptions& options) {
  const auto records = split_records(text, options.delimiter);
  if (records.empty()) throw Error(Errc::EmptyFile, name + " has no header row");
  const auto& header = records.front().fields;
  check_unique(header);

  std::vector<std::vector<std::string>> cells(header.size());
  for (auto& c : cells) c.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      throw Error(Errc::RaggedRow, fmt::format("line {} has {} fields, header has {}", rec.line, rec.fields.size(),
                                               header.size()));
    }
    for (std::size_t c = 0; c < header.size(); ++c) cells[c].push_back(rec.fields[c]);
  }

  std::vector<Column> columns;
  columns.reserve(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    columns.push_back(Column::from_text(header[c], std::move(cells[c]), options.na_tokens));
  }
  return Table(std::move(name), std::move(columns));
}

Table load_table(const std::filesystem::path& path, const CsvOptions& options) {
  return parse_table(read_file(path), path.stem().string(), options);
}

std::string to_csv(const Table& table, char delimiter) {
  std::string out;
  const auto& cols = table.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out.push_back(delimiter);
    append_cell(out, cols[c].name(), delimiter);
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out.push_back(delimiter);
      append_cell(out, cols[c].text(r), delimiter);
    }
    out.push_back('\n');
  }
  return out;
}

void write_table(const Table& table, const std::filesystem::path& path, char delimiter) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << to_csv(table, delimiter);
}

Table extract_columns(const Table& table, std::span<const std::string> names) {
  if (names.empty() || names.size() > 2) {
    throw Error(Errc::InvalidArgument, fmt::format("expected 1 or 2 column names, got {}", names.size()));
  }
  std::vector<Column> picked;
  for (const auto& n : names) picked.push_back(table.column(n));
  Table out(table.name(), std::move(picked));
  for (const auto& [k, v] : table.metadata()) out = out.with_metadata(k, v);
  return out;
}

CleanResult clean_missing(const Table& table, std::span<const std::string> columns, const CleaningPolicy& policy) {
  std::vector<std::string> targets(columns.begin(), columns.end());
  if (targets.empty()) targets = table.column_names();
  for (const auto& t : targets) (void)table.column(t);

  auto missing_at = [&](const Column& col, std::size_t r) {
    return col.is_missing(r) || is_na(col.text(r), policy.invalid_tokens);
  };

  CleanResult result;
  if (policy.mode == CleaningMode::DropRow) {
    std::vector<std::size_t> keep;
    keep.reserve(table.row_count());
    for (std::size_t r = 0; r < table.row_count(); ++r) {
      bool ok = true;
      for (const auto& t : targets) {
        if (missing_at(table.column(t), r)) {
          ok = false;
          break;
        }
      }
      if (ok) keep.push_back(r);
    }
    if (keep.empty() && table.row_count() > 0) {
      throw Error(Errc::AllRowsDropped, "every row has a missing value in the cleaned columns");
    }
    std::vector<Column> cols;
    for (const auto& c : table.columns()) cols.push_back(c.take(keep));
    result.rows_dropped = table.row_count() - keep.size();
    result.table = Table(table.name(), std::move(cols));
    for (const auto& [k, v] : table.metadata()) result.table = result.table.with_metadata(k, v);
    return result;
  }

  std::vector<Column> cols;
  for (const auto& col : table.columns()) {
    if (std::find(targets.begin(), targets.end(), col.name()) == targets.end()) {
      cols.push_back(col);
      continue;
    }
    if (policy.mode == CleaningMode::FillMedian && !col.is_numerical()) {
      throw Error(Errc::InvalidArgument, "FillMedian needs a numerical column, '" + col.name() + "' is categorical");
    }
    std::vector<std::string> raw;
    std::vector<std::size_t> holes;
    std::map<std::string, std::size_t> freq;
    std::vector<double> observed;
    for (std::size_t r = 0; r < col.size(); ++r) {
      raw.push_back(col.text(r));
      if (missing_at(col, r)) {
        holes.push_back(r);
      } else {
        ++freq[col.text(r)];
        if (col.is_numerical()) observed.push_back(col.number(r));
      }
    }
    if (holes.empty()) {
      cols.push_back(col);
      continue;
    }
    if (freq.empty()) {
      throw Error(Errc::InvalidArgument, "column '" + col.name() + "' has no observed value to fill from");
    }
    std::string fill;
    if (policy.mode == CleaningMode::FillMedian) {
      fill = format_number(stats::median(observed));
    } else {
      // Mode; ties resolve to the lexicographically smallest label.
      std::size_t best = 0;
      for (const auto& [label, count] : freq) {
        if (count > best) {
          best = count;
          fill = label;
        }
      }
    }
    for (std::size_t r : holes) raw[r] = fill;
    result.cells_filled += holes.size();
    cols.push_back(Column::with_kind(col.name(), col.kind(), std::move(raw), TokenSet{}));
  }
  result.table = Table(table.name(), std::move(cols));
  for (const auto& [k, v] : table.metadata()) result.table = result.table.with_metadata(k, v);
  return result;
}

Table normalize_or_standardize(const Table& table, std::string_view column, ScaleMode mode) {
  const Column& col = table.column(column);
  if (!col.is_numerical()) {
    throw Error(Errc::NonNumericalTarget, fmt::format("column '{}' is categorical", column));
  }
  const auto values = col.observed_numbers();
  if (values.empty()) throw Error(Errc::ConstantColumn, fmt::format("column '{}' has no values", column));
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo;
  const double max = *hi;
  const double mean = stats::mean(values);
  const double sd = stats::population_sd(values);
  if (max == min || sd == 0.0) {
    throw Error(Errc::ConstantColumn, fmt::format("column '{}' is constant", column));
  }

  std::vector<std::optional<double>> scaled(col.size());
  for (std::size_t r = 0; r < col.size(); ++r) {
    if (col.is_missing(r)) continue;
    const double x = col.number(r);
    scaled[r] = mode == ScaleMode::Normalize ? (x - min) / (max - min) : (x - mean) / sd;
  }
  std::vector<Column> cols;
  for (const auto& c : table.columns()) {
    cols.push_back(c.name() == column ? Column::numerical(c.name(), scaled) : c);
  }
  Table out(table.name(), std::move(cols));
  for (const auto& [k, v] : table.metadata()) out = out.with_metadata(k, v);
  return out;
}

Table group_and_aggregate(const Table& table, std::string_view by, std::string_view target, Aggregate fn) {
  const Column& key = table.column(by);
  const Column& val = table.column(target);
  if (fn != Aggregate::Count && !val.is_numerical()) {
    throw Error(Errc::NonNumericalTarget, fmt::format("cannot aggregate categorical column '{}'", target));
  }

  struct Group {
    std::string label;
    double order = 0;
    std::size_t rows = 0;
    std::vector<double> values;
  };
  std::map<std::string, Group> groups;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    if (key.is_missing(r)) continue;
    auto& g = groups[key.text(r)];
    g.label = key.text(r);
    g.order = key.is_numerical() ? key.number(r) : 0.0;
    ++g.rows;
    if (fn != Aggregate::Count && !val.is_missing(r)) g.values.push_back(val.number(r));
  }

  std::vector<Group*> ordered;
  for (auto& [label, g] : groups) ordered.push_back(&g);
  if (key.is_numerical()) {
    std::stable_sort(ordered.begin(), ordered.end(), [](const Group* a, const Group* b) { return a->order < b->order; });
  }

  std::vector<std::optional<std::string>> labels;
  std::vector<std::optional<double>> results;
  for (const Group* g : ordered) {
    labels.push_back(g->label);
    switch (fn) {
      case Aggregate::Count: results.push_back(static_cast<double>(g->rows)); break;
      case Aggregate::Sum: {
        long double s = 0;
        for (double v : g->values) s += v;
        results.push_back(static_cast<double>(s));
        break;
      }
      case Aggregate::Mean:
        results.push_back(g->values.empty() ? std::nullopt : std::optional<double>(stats::mean(g->values)));
        break;
      case Aggregate::Median:
        results.push_back(g->values.empty() ? std::nullopt : std::optional<double>(stats::median(g->values)));
        break;
    }
  }

  static constexpr std::string_view kSuffix[] = {"mean", "count", "sum", "median"};
  Column key_col = key.is_numerical()
                       ? Column::with_kind(std::string(by), ColumnKind::Numerical,
                                           [&] {
                                             std::vector<std::string> raw;
                                             for (const auto& l : labels) raw.push_back(*l);
                                             return raw;
                                           }(),
                                           TokenSet{})
                       : Column::categorical(std::string(by), labels);
  std::vector<Column> cols;
  cols.push_back(std::move(key_col));
  cols.push_back(
      Column::numerical(fmt::format("{}_{}", target, kSuffix[static_cast<int>(fn)]), results));
  return Table(table.name(), std::move(cols));
}

}  // namespace biasaudit::tabular
