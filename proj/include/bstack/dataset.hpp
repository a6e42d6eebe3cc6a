#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace bstack {

enum class VariableRole { outcome, focal, nonfocal, holdout, ignore };

VariableRole parse_role(std::string_view text);
std::string_view to_string(VariableRole role);

/// One column of a dataset. Numeric columns keep their values; categorical
/// columns keep a 0-based level code per row plus the ordered level labels.
/// Code 0 is the base level.
struct Column {
  std::string name;
  VariableRole role = VariableRole::ignore;
  bool categorical = false;
  std::vector<double> values;
  std::vector<int> codes;
  std::vector<std::string> levels;

  std::size_t size() const { return categorical ? codes.size() : values.size(); }
  std::size_t level_count() const { return levels.size(); }
  int level_index(std::string_view label) const;  // -1 when absent
};

/// Per-column instructions for ingestion.
struct ColumnSchema {
  VariableRole role = VariableRole::ignore;
  std::optional<bool> categorical;  // unset: numeric if every cell parses
  std::vector<std::string> levels;  // fixes level order when non-empty
};

struct Schema {
  std::vector<std::pair<std::string, ColumnSchema>> columns;  // declaration order
  std::vector<std::string> warnings;

  const ColumnSchema* find(std::string_view name) const;
};

Schema load_schema(const std::filesystem::path& path);
Schema parse_schema(std::string_view json_text);

/// Immutable-by-convention table of equally long columns.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Column> columns);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::string_view name) const;
  const Column* find(std::string_view name) const;
  bool has(std::string_view name) const { return find(name) != nullptr; }

  const Column& outcome() const;
  Eigen::VectorXd outcome_vector() const;
  std::vector<std::string> names_with_role(VariableRole role) const;

  /// Copy with an extra column appended (replaces an existing column of the same name).
  Dataset with_column(Column column) const;
  /// Copy with the given row removed.
  Dataset without_row(std::size_t row) const;
  /// Copy keeping only the listed rows, in order.
  Dataset select_rows(const std::vector<std::size_t>& rows) const;

  std::vector<std::string> warnings;

 private:
  std::vector<Column> columns_;
  std::size_t rows_ = 0;
};

/// Reads an RFC-4180 style CSV with a header row. Columns named in the
/// schema receive its role; other columns are kept with role `ignore`.
Dataset load_csv(const std::filesystem::path& path, const Schema& schema);
Dataset parse_csv(std::string_view text, const Schema& schema);

/// Writes every column; numeric cells use 17 significant digits so that
/// re-loading reproduces the doubles exactly.
void write_csv(const Dataset& data, const std::filesystem::path& path);
std::string to_csv(const Dataset& data);

/// Split a CSV document into records of fields (quotes handled per RFC 4180).
std::vector<std::vector<std::string>> parse_csv_records(std::string_view text);
std::string csv_escape(std::string_view field);
std::string format_double(double value);

struct QuartileBinning {
  std::string source;
  std::string name;
  double cuts[3] = {0.0, 0.0, 0.0};
};

/// Adds a 4-level categorical column "1".."4" cut at the type-7 sample
/// quartiles of `column`: x <= q25 -> "1", <= q50 -> "2", <= q75 -> "3", else "4".
Dataset quartile_bin(const Dataset& data, std::string_view column,
                     std::string_view new_name = {},
                     std::optional<VariableRole> role = std::nullopt,
                     QuartileBinning* binning = nullptr);

}  // namespace bstack
