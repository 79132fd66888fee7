#ifndef DCSHAP_TABLE_HPP
#define DCSHAP_TABLE_HPP

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dcshap/errors.hpp"
#include "dcshap/value.hpp"

namespace dcshap {

// Address of one cell. Rows are 1-based, attributes by name.
struct CellRef {
  std::size_t row = 0;
  std::string attr;

  friend bool operator==(const CellRef&, const CellRef&) = default;
  friend auto operator<=>(const CellRef&, const CellRef&) = default;

  std::string to_string() const {
    return "t" + std::to_string(row) + "[" + attr + "]";
  }
  friend std::ostream& operator<<(std::ostream& os, const CellRef& ref) {
    return os << ref.to_string();
  }
};

struct CellChange {
  CellRef ref;
  Value before;
  Value after;

  friend bool operator==(const CellChange&, const CellChange&) = default;
};

struct ColumnDistribution {
  std::string attr;
  std::map<Value, std::size_t> weights;  // non-null values only

  std::size_t total() const {
    std::size_t sum = 0;
    for (const auto& [value, count] : weights) sum += count;
    return sum;
  }

  // Most frequent value; ties go to the smallest value in canonical order.
  std::optional<Value> argmax() const {
    std::optional<Value> best;
    std::size_t best_count = 0;
    for (const auto& [value, count] : weights) {
      if (count > best_count) {
        best = value;
        best_count = count;
      }
    }
    return best;
  }
};

// A rectangular table of values with a named, ordered schema. Cells are
// stored row-major. Rows are addressed 1-based throughout the public API.
class Table {
 public:
  Table() = default;

  Table(std::vector<std::string> schema, std::vector<std::vector<Value>> rows)
      : schema_(std::move(schema)) {
    validate_schema(schema_);
    cells_.reserve(rows.size() * schema_.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != schema_.size()) {
        throw ArityError("row " + std::to_string(r + 1) + " has " +
                         std::to_string(rows[r].size()) + " values, expected " +
                         std::to_string(schema_.size()));
      }
      for (auto& v : rows[r]) cells_.push_back(std::move(v));
    }
    row_count_ = rows.size();
  }

  const std::vector<std::string>& schema() const { return schema_; }
  std::size_t row_count() const { return row_count_; }
  std::size_t column_count() const { return schema_.size(); }
  std::size_t cell_count() const { return cells_.size(); }

  std::optional<std::size_t> column_index(std::string_view attr) const {
    auto it = std::find(schema_.begin(), schema_.end(), attr);
    if (it == schema_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - schema_.begin());
  }

  std::size_t require_column(std::string_view attr) const {
    auto idx = column_index(attr);
    if (!idx) throw RefError("unknown attribute '" + std::string(attr) + "'");
    return *idx;
  }

  // Validates `ref` and returns its (1-based row, column) position.
  std::pair<std::size_t, std::size_t> locate(const CellRef& ref) const {
    if (ref.row < 1 || ref.row > row_count_) {
      throw RefError("row " + std::to_string(ref.row) + " out of range 1.." +
                     std::to_string(row_count_));
    }
    return {ref.row, require_column(ref.attr)};
  }

  const Value& at(std::size_t row, std::size_t col) const {
    return cells_[(row - 1) * schema_.size() + col];
  }
  const Value& at(const CellRef& ref) const {
    auto [row, col] = locate(ref);
    return at(row, col);
  }

  void set(std::size_t row, std::size_t col, Value v) {
    cells_[(row - 1) * schema_.size() + col] = std::move(v);
  }
  void set(const CellRef& ref, Value v) {
    auto [row, col] = locate(ref);
    set(row, col, std::move(v));
  }

  std::span<const Value> row(std::size_t row) const {
    return std::span<const Value>(cells_).subspan((row - 1) * schema_.size(),
                                                  schema_.size());
  }

  CellRef ref(std::size_t row, std::size_t col) const {
    return CellRef{row, schema_[col]};
  }

  // Every cell in canonical order: by row, then attribute position.
  std::vector<CellRef> all_cells() const {
    std::vector<CellRef> out;
    out.reserve(cells_.size());
    for (std::size_t r = 1; r <= row_count_; ++r) {
      for (std::size_t c = 0; c < schema_.size(); ++c) out.push_back(ref(r, c));
    }
    return out;
  }

  // Row-major position of a cell, i.e. its rank in all_cells().
  std::size_t flat_index(const CellRef& ref) const {
    auto [row, col] = locate(ref);
    return (row - 1) * schema_.size() + col;
  }

  const std::vector<Value>& cells() const { return cells_; }

  bool same_shape(const Table& other) const {
    return schema_ == other.schema_ && row_count_ == other.row_count_;
  }

  friend bool operator==(const Table&, const Table&) = default;

 private:
  static void validate_schema(const std::vector<std::string>& schema) {
    std::unordered_set<std::string_view> seen;
    for (const auto& name : schema) {
      if (name.empty()) throw SchemaError("empty attribute name");
      if (!seen.insert(name).second) {
        throw SchemaError("duplicate attribute name '" + name + "'");
      }
    }
  }

  std::vector<std::string> schema_;
  std::size_t row_count_ = 0;
  std::vector<Value> cells_;
};

namespace detail {

struct CsvField {
  std::string text;
  bool quoted = false;
};

// Splits CSV text into records. Comma separator, double-quote quoting with
// "" as the escape, LF or CRLF record ends. A final record terminator does
// not start an empty record, every other terminator ends one.
inline std::vector<std::vector<CsvField>> split_csv(std::string_view text) {
  std::vector<std::vector<CsvField>> records;
  std::vector<CsvField> record;
  CsvField field;
  std::size_t line = 1;
  std::size_t column = 0;
  bool in_record = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field = CsvField{};
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
    in_record = false;
  };

  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    ++column;
    in_record = true;
    if (c == '"' && field.text.empty() && !field.quoted) {
      field.quoted = true;
      std::size_t start_line = line;
      std::size_t start_column = column;
      ++i;
      bool closed = false;
      while (i < text.size()) {
        char q = text[i++];
        ++column;
        if (q == '"') {
          if (i < text.size() && text[i] == '"') {
            field.text += '"';
            ++i;
            ++column;
          } else {
            closed = true;
            break;
          }
        } else {
          if (q == '\n') {
            ++line;
            column = 0;
          }
          field.text += q;
        }
      }
      if (!closed) throw ParseError(start_line, start_column, "unterminated quoted field");
      if (i < text.size() && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
        throw ParseError(line, column + 1, "unexpected character after closing quote");
      }
      continue;
    }
    if (c == ',') {
      end_field();
      ++i;
      continue;
    }
    if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      ++i;
      continue;
    }
    if (c == '\n') {
      end_record();
      ++line;
      column = 0;
      ++i;
      continue;
    }
    if (field.quoted) throw ParseError(line, column, "text after quoted field");
    field.text += c;
    ++i;
  }
  if (in_record) end_record();
  return records;
}

inline bool needs_quotes(std::string_view s) {
  if (s.empty()) return true;
  if (Decimal::parse(s)) return true;
  return s.find_first_of(",\"\r\n") != std::string_view::npos;
}

inline void write_csv_field(std::string& out, std::string_view s, bool force_quotes) {
  if (!force_quotes && !needs_quotes(s)) {
    out += s;
    return;
  }
  out += '"';
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

}  // namespace detail

// Parses UTF-8 CSV. The first record is the header. Unquoted fields are
// null when empty, numbers when they are decimals, text otherwise; quoted
// fields are always text.
inline Table parse_table(std::string_view csv_text) {
  if (csv_text.empty()) throw SchemaError("empty input");
  auto records = detail::split_csv(csv_text);
  if (records.empty()) throw SchemaError("empty input");

  std::vector<std::string> schema;
  for (auto& f : records.front()) schema.push_back(std::move(f.text));

  std::vector<std::vector<Value>> rows;
  rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != schema.size()) {
      throw ArityError("record " + std::to_string(r + 1) + " has " +
                       std::to_string(records[r].size()) + " fields, header has " +
                       std::to_string(schema.size()));
    }
    std::vector<Value> row;
    row.reserve(schema.size());
    for (auto& f : records[r]) {
      row.push_back(f.quoted ? Value::text(std::move(f.text))
                             : Value::from_field(f.text));
    }
    rows.push_back(std::move(row));
  }
  return Table(std::move(schema), std::move(rows));
}

inline std::string serialize_table(const Table& table) {
  std::string out;
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    if (c) out += ',';
    const auto& name = table.schema()[c];
    detail::write_csv_field(out, name, name.find_first_of(",\"\r\n") != std::string::npos);
  }
  out += '\n';
  for (std::size_t r = 1; r <= table.row_count(); ++r) {
    for (std::size_t c = 0; c < table.column_count(); ++c) {
      if (c) out += ',';
      const Value& v = table.at(r, c);
      if (v.is_number()) {
        out += v.as_number().text();
      } else if (v.is_text()) {
        detail::write_csv_field(out, v.as_text(), false);
      }
    }
    out += '\n';
  }
  return out;
}

// One change per differing cell, ordered by (row, attribute position).
inline std::vector<CellChange> diff_tables(const Table& dirty, const Table& clean) {
  if (dirty.schema() != clean.schema()) throw ShapeError("schemas differ");
  if (dirty.row_count() != clean.row_count()) {
    throw ShapeError("row counts differ: " + std::to_string(dirty.row_count()) +
                     " vs " + std::to_string(clean.row_count()));
  }
  std::vector<CellChange> changes;
  for (std::size_t r = 1; r <= dirty.row_count(); ++r) {
    for (std::size_t c = 0; c < dirty.column_count(); ++c) {
      if (dirty.at(r, c) != clean.at(r, c)) {
        changes.push_back({dirty.ref(r, c), dirty.at(r, c), clean.at(r, c)});
      }
    }
  }
  return changes;
}

// Copy of `table` where every cell outside `coalition` is null.
inline Table mask_cells(const Table& table, std::span<const CellRef> coalition) {
  std::vector<bool> keep(table.cell_count(), false);
  for (const auto& ref : coalition) keep[table.flat_index(ref)] = true;
  std::vector<std::vector<Value>> rows(table.row_count());
  for (std::size_t r = 1; r <= table.row_count(); ++r) {
    rows[r - 1].reserve(table.column_count());
    for (std::size_t c = 0; c < table.column_count(); ++c) {
      bool in = keep[(r - 1) * table.column_count() + c];
      rows[r - 1].push_back(in ? table.at(r, c) : Value::null());
    }
  }
  return Table(table.schema(), std::move(rows));
}

inline Table mask_cells(const Table& table, const std::set<CellRef>& coalition) {
  std::vector<CellRef> refs(coalition.begin(), coalition.end());
  return mask_cells(table, std::span<const CellRef>(refs));
}

inline ColumnDistribution column_distribution(const Table& table, std::string_view attr) {
  std::size_t col = table.require_column(attr);
  ColumnDistribution dist{std::string(attr), {}};
  for (std::size_t r = 1; r <= table.row_count(); ++r) {
    const Value& v = table.at(r, col);
    if (!v.is_null()) ++dist.weights[v];
  }
  return dist;
}

}  // namespace dcshap

#endif  // DCSHAP_TABLE_HPP
