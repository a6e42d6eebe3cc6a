#include "bstack/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bstack/error.hpp"
#include "bstack/quantile.hpp"

namespace bstack {

namespace {

std::optional<double> parse_number(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

bool is_missing(std::string_view cell) {
  while (!cell.empty() && (cell.front() == ' ' || cell.back() == ' ')) {
    if (cell.front() == ' ') cell.remove_prefix(1);
    else cell.remove_suffix(1);
  }
  return cell.empty() || cell == "NA";
}

// Numeric-aware ordering for inferred level labels.
void sort_levels(std::vector<std::string>& levels) {
  const bool numeric = std::all_of(levels.begin(), levels.end(),
                                   [](const std::string& l) { return parse_number(l).has_value(); });
  if (numeric) {
    std::sort(levels.begin(), levels.end(),
              [](const std::string& a, const std::string& b) { return *parse_number(a) < *parse_number(b); });
  } else {
    std::sort(levels.begin(), levels.end());
  }
}

}  // namespace

VariableRole parse_role(std::string_view text) {
  if (text == "outcome") return VariableRole::outcome;
  if (text == "focal") return VariableRole::focal;
  if (text == "nonfocal" || text == "non-focal") return VariableRole::nonfocal;
  if (text == "holdout" || text == "hold-out") return VariableRole::holdout;
  if (text == "ignore") return VariableRole::ignore;
  throw ConfigError("unknown variable role '" + std::string(text) + "'");
}

std::string_view to_string(VariableRole role) {
  switch (role) {
    case VariableRole::outcome: return "outcome";
    case VariableRole::focal: return "focal";
    case VariableRole::nonfocal: return "nonfocal";
    case VariableRole::holdout: return "holdout";
    case VariableRole::ignore: return "ignore";
  }
  return "ignore";
}

int Column::level_index(std::string_view label) const {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == label) return static_cast<int>(i);
  return -1;
}

const ColumnSchema* Schema::find(std::string_view name) const {
  for (const auto& [n, c] : columns)
    if (n == name) return &c;
  return nullptr;
}

Schema parse_schema(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("schema: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("schema: expected a JSON object of column -> role");

  Schema schema;
  const nlohmann::json* shared_levels = nullptr;
  if (doc.contains("levels") && doc["levels"].is_object()) shared_levels = &doc["levels"];

  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() == "levels" && it.value().is_object()) continue;
    ColumnSchema col;
    std::string role_text;
    if (it.value().is_string()) {
      role_text = it.value().get<std::string>();
    } else if (it.value().is_object()) {
      const auto& obj = it.value();
      if (!obj.contains("role") || !obj["role"].is_string())
        throw ConfigError("schema: column '" + it.key() + "' needs a string field 'role'");
      role_text = obj["role"].get<std::string>();
      if (obj.contains("type")) {
        const auto type = obj["type"].get<std::string>();
        if (type == "categorical") col.categorical = true;
        else if (type == "numeric") col.categorical = false;
        else throw ConfigError("schema: column '" + it.key() + "' has unknown type '" + type + "'");
      }
      if (obj.contains("levels")) {
        for (const auto& l : obj["levels"]) col.levels.push_back(l.is_string() ? l.get<std::string>() : l.dump());
        col.categorical = true;
      }
    } else {
      throw ConfigError("schema: column '" + it.key() + "' must map to a role string or object");
    }
    if (role_text == "weight") {
      schema.warnings.push_back("column '" + it.key() +
                                "' is a survey weight; weights are parsed but not used in estimation");
      col.role = VariableRole::ignore;
    } else {
      try {
        col.role = parse_role(role_text);
      } catch (const ConfigError& e) {
        throw ConfigError("schema: column '" + it.key() + "': " + e.what());
      }
    }
    if (shared_levels && shared_levels->contains(it.key())) {
      col.levels.clear();
      for (const auto& l : (*shared_levels)[it.key()])
        col.levels.push_back(l.is_string() ? l.get<std::string>() : l.dump());
      col.categorical = true;
    }
    schema.columns.emplace_back(it.key(), std::move(col));
  }
  const auto outcomes = std::count_if(schema.columns.begin(), schema.columns.end(),
                                      [](const auto& c) { return c.second.role == VariableRole::outcome; });
  if (outcomes != 1) throw ConfigError("schema: exactly one column must have role 'outcome'");
  return schema;
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schema(ss.str());
}

Dataset::Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
  rows_ = columns_.empty() ? 0 : columns_.front().size();
  std::set<std::string> seen;
  for (const auto& c : columns_) {
    if (c.size() != rows_) throw Error("column '" + c.name + "' has a different length");
    if (!seen.insert(c.name).second) throw Error("duplicate column '" + c.name + "'");
  }
}

const Column* Dataset::find(std::string_view name) const {
  for (const auto& c : columns_)
    if (c.name == name) return &c;
  return nullptr;
}

const Column& Dataset::column(std::string_view name) const {
  if (const auto* c = find(name)) return *c;
  throw ConfigError("unknown column '" + std::string(name) + "'");
}

const Column& Dataset::outcome() const {
  for (const auto& c : columns_)
    if (c.role == VariableRole::outcome) return c;
  throw ConfigError("dataset has no outcome column");
}

Eigen::VectorXd Dataset::outcome_vector() const {
  const auto& y = outcome();
  return Eigen::Map<const Eigen::VectorXd>(y.values.data(), static_cast<Eigen::Index>(y.values.size()));
}

std::vector<std::string> Dataset::names_with_role(VariableRole role) const {
  std::vector<std::string> out;
  for (const auto& c : columns_)
    if (c.role == role) out.push_back(c.name);
  return out;
}

Dataset Dataset::with_column(Column column) const {
  if (!columns_.empty() && column.size() != rows_)
    throw Error("column '" + column.name + "' has " + std::to_string(column.size()) + " rows, dataset has " +
                std::to_string(rows_));
  auto cols = columns_;
  auto it = std::find_if(cols.begin(), cols.end(), [&](const Column& c) { return c.name == column.name; });
  if (it != cols.end()) *it = std::move(column);
  else cols.push_back(std::move(column));
  Dataset out(std::move(cols));
  out.warnings = warnings;
  return out;
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
  auto cols = columns_;
  for (auto& c : cols) {
    if (c.categorical) {
      std::vector<int> codes;
      codes.reserve(rows.size());
      for (auto r : rows) codes.push_back(c.codes.at(r));
      c.codes = std::move(codes);
    } else {
      std::vector<double> values;
      values.reserve(rows.size());
      for (auto r : rows) values.push_back(c.values.at(r));
      c.values = std::move(values);
    }
  }
  Dataset out(std::move(cols));
  out.warnings = warnings;
  return out;
}

Dataset Dataset::without_row(std::size_t row) const {
  if (row >= rows_) throw Error("row index out of range");
  std::vector<std::size_t> keep;
  keep.reserve(rows_ - 1);
  for (std::size_t r = 0; r < rows_; ++r)
    if (r != row) keep.push_back(r);
  return select_rows(keep);
}

std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !record.empty()) {
          record.push_back(std::move(field));
          records.push_back(std::move(record));
        }
        field.clear();
        record.clear();
        field_started = false;
        break;
      default:
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) throw ConfigError("csv: unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

Dataset parse_csv(std::string_view text, const Schema& schema) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  const auto records = parse_csv_records(text);
  if (records.empty()) throw ConfigError("csv: missing header row");
  const auto& header = records.front();
  const std::size_t n = records.size() - 1;

  for (const auto& [name, _] : schema.columns) {
    if (std::find(header.begin(), header.end(), name) == header.end())
      throw ConfigError("csv: schema column '" + name + "' not found in header");
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size())
      throw ConfigError("csv: row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                        " fields, header has " + std::to_string(header.size()));
  }

  std::vector<Column> columns;
  for (std::size_t c = 0; c < header.size(); ++c) {
    Column col;
    col.name = header[c];
    const ColumnSchema* cs = schema.find(col.name);
    if (cs) col.role = cs->role;
    const bool checked = cs != nullptr;

    for (std::size_t r = 0; r < n; ++r) {
      if (checked && is_missing(records[r + 1][c]))
        throw ConfigError("missing value at row " + std::to_string(r + 1) + ", column " + col.name);
    }

    bool categorical = false;
    if (cs && cs->categorical) {
      categorical = *cs->categorical;
    } else {
      for (std::size_t r = 0; r < n && !categorical; ++r)
        if (!is_missing(records[r + 1][c]) && !parse_number(records[r + 1][c])) categorical = true;
    }

    if (categorical) {
      col.categorical = true;
      if (cs && !cs->levels.empty()) {
        col.levels = cs->levels;
      } else {
        std::set<std::string> distinct;
        for (std::size_t r = 0; r < n; ++r) distinct.insert(records[r + 1][c]);
        col.levels.assign(distinct.begin(), distinct.end());
        sort_levels(col.levels);
      }
      col.codes.reserve(n);
      for (std::size_t r = 0; r < n; ++r) {
        const int code = col.level_index(records[r + 1][c]);
        if (code < 0)
          throw ConfigError("csv: value '" + records[r + 1][c] + "' at row " + std::to_string(r + 1) +
                            ", column " + col.name + " is not a declared level");
        col.codes.push_back(code);
      }
    } else {
      col.values.reserve(n);
      for (std::size_t r = 0; r < n; ++r) {
        const auto v = parse_number(records[r + 1][c]);
        col.values.push_back(v ? *v : std::nan(""));
      }
    }
    columns.push_back(std::move(col));
  }

  for (const auto& col : columns) {
    if (col.role != VariableRole::outcome) continue;
    if (col.categorical) throw ConfigError("outcome column '" + col.name + "' must be numeric 0/1");
    for (std::size_t r = 0; r < n; ++r)
      if (col.values[r] != 0.0 && col.values[r] != 1.0)
        throw ConfigError("non-binary outcome value at row " + std::to_string(r + 1) + ", column " + col.name);
  }

  Dataset data(std::move(columns));
  data.warnings = schema.warnings;
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open data file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), schema);
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += '"';
  return out;
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string to_csv(const Dataset& data) {
  std::string out;
  const auto& cols = data.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out += ',';
    out += csv_escape(cols[c].name);
  }
  out += '\n';
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out += ',';
      const auto& col = cols[c];
      if (col.categorical) out += csv_escape(col.levels[static_cast<std::size_t>(col.codes[r])]);
      else out += format_double(col.values[r]);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << to_csv(data);
}

Dataset quartile_bin(const Dataset& data, std::string_view column, std::string_view new_name,
                     std::optional<VariableRole> role, QuartileBinning* binning) {
  const Column& src = data.column(column);
  if (src.categorical) throw ConfigError("quartile_bin: column '" + src.name + "' is not numeric");
  std::vector<double> sorted = src.values;
  std::sort(sorted.begin(), sorted.end());
  const auto distinct = std::unique(sorted.begin(), sorted.end()) - sorted.begin();
  if (distinct < 4)
    throw ConfigError("quartile_bin: column '" + src.name + "' has fewer than 4 distinct values");
  sorted = src.values;
  std::sort(sorted.begin(), sorted.end());
  const std::span<const double> s(sorted);
  const double cuts[3] = {quantile_sorted(s, 0.25), quantile_sorted(s, 0.5), quantile_sorted(s, 0.75)};

  Column out;
  out.name = new_name.empty() ? src.name + "_Q" : std::string(new_name);
  out.role = role.value_or(src.role);
  out.categorical = true;
  out.levels = {"1", "2", "3", "4"};
  out.codes.reserve(src.values.size());
  for (double v : src.values) {
    int level = 3;
    for (int q = 0; q < 3; ++q) {
      if (v <= cuts[q]) {
        level = q;
        break;
      }
    }
    out.codes.push_back(level);
  }
  if (binning) {
    binning->source = src.name;
    binning->name = out.name;
    std::copy(std::begin(cuts), std::end(cuts), binning->cuts);
  }
  return data.with_column(std::move(out));
}

}  // namespace bstack
