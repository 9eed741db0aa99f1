// SPDX-License-Identifier: Apache-2.0
#pragma once

// Column-oriented tables plus the loading and preprocessing operations the
// detection workflow runs before any metric is computed.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace biasaudit::tabular {

enum class ColumnKind { Categorical, Numerical };

std::string_view to_string(ColumnKind kind) noexcept;

/// {"", "NA", "N/A", "?", "null"}
const std::set<std::string, std::less<>>& default_na_tokens();

using TokenSet = std::set<std::string, std::less<>>;

struct CsvOptions {
  char delimiter = ',';
  TokenSet na_tokens = default_na_tokens();
};

/// One typed column. Raw cell text is kept verbatim so a loaded table can be
/// written back unchanged; numerical columns also cache parsed values.
class Column {
 public:
  /// Infers the kind with infer_kind(). Cells that are NA tokens, or that do
  /// not parse in a column inferred Numerical, are marked missing.
  static Column from_text(std::string name, std::vector<std::string> raw,
                          const TokenSet& na_tokens = default_na_tokens());
  static Column with_kind(std::string name, ColumnKind kind, std::vector<std::string> raw,
                          const TokenSet& na_tokens = default_na_tokens());
  static Column categorical(std::string name, const std::vector<std::optional<std::string>>& values);
  static Column numerical(std::string name, const std::vector<std::optional<double>>& values);

  const std::string& name() const noexcept { return name_; }
  ColumnKind kind() const noexcept { return kind_; }
  bool is_numerical() const noexcept { return kind_ == ColumnKind::Numerical; }
  std::size_t size() const noexcept { return raw_.size(); }

  bool is_missing(std::size_t row) const { return missing_[row] != 0; }
  const std::string& text(std::size_t row) const { return raw_[row]; }
  /// NaN for missing cells and for categorical columns.
  double number(std::size_t row) const;
  std::size_t missing_count() const noexcept;

  /// Distinct non-missing labels in ascending order.
  std::vector<std::string> categories() const;
  /// Non-missing numerical values in row order.
  std::vector<double> observed_numbers() const;

  Column renamed(std::string name) const;
  Column take(std::span<const std::size_t> rows) const;

  friend bool operator==(const Column&, const Column&) = default;

 private:
  Column() = default;

  std::string name_;
  ColumnKind kind_ = ColumnKind::Categorical;
  std::vector<std::string> raw_;
  std::vector<char> missing_;
  std::vector<double> numbers_;
};

/// Immutable once built; every operation below returns a new Table.
class Table {
 public:
  Table() = default;
  /// Throws InvalidArgument on ragged columns and DuplicateHeader on repeated names.
  Table(std::string name, std::vector<Column> columns);

  const std::string& name() const noexcept { return name_; }
  const std::vector<Column>& columns() const noexcept { return columns_; }
  std::size_t row_count() const noexcept { return row_count_; }
  std::size_t column_count() const noexcept { return columns_.size(); }
  std::vector<std::string> column_names() const;

  bool has_column(std::string_view name) const noexcept;
  /// Throws UnknownColumn.
  const Column& column(std::string_view name) const;

  const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }
  Table with_metadata(std::string key, std::string value) const;
  Table renamed(std::string name) const;

  friend bool operator==(const Table&, const Table&) = default;

 private:
  std::string name_;
  std::vector<Column> columns_;
  std::size_t row_count_ = 0;
  std::map<std::string, std::string> metadata_;
};

ColumnKind infer_kind(std::span<const std::string> values, const TokenSet& na_tokens = default_na_tokens());

/// Header names in file order. Errors: FileNotFound, EmptyFile, DuplicateHeader.
std::vector<std::string> list_features(const std::filesystem::path& path, const CsvOptions& options = {});

/// Errors: FileNotFound, EmptyFile, DuplicateHeader, ParseError, RaggedRow.
Table load_table(const std::filesystem::path& path, const CsvOptions& options = {});
Table parse_table(std::string_view text, std::string name, const CsvOptions& options = {});

std::string to_csv(const Table& table, char delimiter = ',');
void write_table(const Table& table, const std::filesystem::path& path, char delimiter = ',');

/// Accepts one or two names.
Table extract_columns(const Table& table, std::span<const std::string> names);

enum class CleaningMode { DropRow, FillMode, FillMedian };

struct CleaningPolicy {
  CleaningMode mode = CleaningMode::DropRow;
  /// Cells whose text is in this set count as missing in addition to the
  /// column's own missing mask.
  TokenSet invalid_tokens = default_na_tokens();
};

struct CleanResult {
  Table table;
  std::size_t rows_dropped = 0;
  std::size_t cells_filled = 0;
  std::size_t changed() const noexcept { return rows_dropped + cells_filled; }
};

/// Empty `columns` means every column. Errors: UnknownColumn, AllRowsDropped,
/// InvalidArgument (FillMedian on a categorical column, fill with no observed value).
CleanResult clean_missing(const Table& table, std::span<const std::string> columns,
                          const CleaningPolicy& policy = {});

enum class ScaleMode { Normalize, Standardize };

/// Standardize uses the population standard deviation.
Table normalize_or_standardize(const Table& table, std::string_view column, ScaleMode mode);

enum class Aggregate { Mean, Count, Sum, Median };

/// Output has columns {by, "<target>_<fn>"} with groups in ascending order
/// (numeric order for a numerical `by`, lexicographic otherwise).
Table group_and_aggregate(const Table& table, std::string_view by, std::string_view target, Aggregate fn);

/// Shortest round-trip text for a double.
std::string format_number(double value);
/// Full-string parse of a finite real, surrounding whitespace allowed.
std::optional<double> parse_number(std::string_view text);

}  // namespace biasaudit::tabular
