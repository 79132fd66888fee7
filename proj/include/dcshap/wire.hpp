#ifndef DCSHAP_WIRE_HPP
#define DCSHAP_WIRE_HPP

// JSON forms shared by the adapter protocol, the HTTP service and the CLI's
// machine-readable output.
//
//   table   {"schema": [name...], "rows": [[value|null...]...]}
//   value   JSON string = text, JSON number = number, null = null
//   cell    {"row": 1-based, "attr": name}
//   change  {"row", "attr", "before", "after"}
//   report  {"task", "method", "imputation"?, "samples"?, "seed"?,
//            "values": [{"player", "value", "stderr"?}...], "ranking": [player...]}
//
// Exact values are {"num", "den", "decimal"}. Numbers travel as JSON
// numbers: integers that fit in 64 bits are exact, other decimals are exact
// up to 15 significant digits.

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcshap/errors.hpp"
#include "dcshap/repair.hpp"
#include "dcshap/shapley.hpp"
#include "dcshap/table.hpp"
#include "dcshap/value.hpp"

namespace dcshap::wire {

using json = nlohmann::json;

inline json to_json(const Value& v) {
  if (v.is_null()) return nullptr;
  if (v.is_text()) return v.as_text();
  const Decimal& d = v.as_number();
  if (d.is_integer()) {
    std::string digits = d.normalized();
    try {
      std::size_t used = 0;
      long long x = std::stoll(digits, &used);
      if (used == digits.size()) return static_cast<std::int64_t>(x);
    } catch (const std::out_of_range&) {
    }
  }
  return std::stod(d.normalized());
}

inline Value value_from_json(const json& j) {
  switch (j.type()) {
    case json::value_t::null:
      return Value::null();
    case json::value_t::string:
      return Value::text(j.get<std::string>());
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float: {
      std::string lexeme = j.dump();
      auto d = Decimal::parse(lexeme);
      if (!d) throw SchemaError("number " + lexeme + " is not representable as a decimal");
      return Value::number(std::move(*d));
    }
    default:
      throw SchemaError("cell values must be strings, numbers or null, got " +
                        std::string(j.type_name()));
  }
}

inline json to_json(const Table& table) {
  json rows = json::array();
  for (std::size_t r = 1; r <= table.row_count(); ++r) {
    json row = json::array();
    for (const auto& v : table.row(r)) row.push_back(to_json(v));
    rows.push_back(std::move(row));
  }
  return {{"schema", table.schema()}, {"rows", std::move(rows)}};
}

inline Table table_from_json(const json& j) {
  if (!j.is_object() || !j.contains("schema") || !j.contains("rows")) {
    throw SchemaError("table must be an object with 'schema' and 'rows'");
  }
  const json& schema_json = j.at("schema");
  const json& rows_json = j.at("rows");
  if (!schema_json.is_array() || !rows_json.is_array()) {
    throw SchemaError("'schema' and 'rows' must be arrays");
  }
  std::vector<std::string> schema;
  for (const auto& name : schema_json) {
    if (!name.is_string()) throw SchemaError("attribute names must be strings");
    schema.push_back(name.get<std::string>());
  }
  std::vector<std::vector<Value>> rows;
  for (const auto& row_json : rows_json) {
    if (!row_json.is_array()) throw SchemaError("each row must be an array");
    std::vector<Value> row;
    for (const auto& cell : row_json) row.push_back(value_from_json(cell));
    rows.push_back(std::move(row));
  }
  return Table(std::move(schema), std::move(rows));
}

inline json to_json(const CellRef& ref) { return {{"row", ref.row}, {"attr", ref.attr}}; }

inline CellRef cell_from_json(const json& j) {
  if (!j.is_object() || !j.contains("row") || !j.contains("attr") ||
      !j.at("row").is_number_integer() || !j.at("attr").is_string()) {
    throw SchemaError("cell must be an object with integer 'row' and string 'attr'");
  }
  auto row = j.at("row").get<std::int64_t>();
  if (row < 1) throw RefError("row must be positive");
  return CellRef{static_cast<std::size_t>(row), j.at("attr").get<std::string>()};
}

inline json to_json(const CellChange& change) {
  return {{"row", change.ref.row},
          {"attr", change.ref.attr},
          {"before", to_json(change.before)},
          {"after", to_json(change.after)}};
}

inline json to_json(const std::vector<CellChange>& changes) {
  json out = json::array();
  for (const auto& c : changes) out.push_back(to_json(c));
  return out;
}

inline std::vector<CellChange> changes_from_json(const json& j) {
  std::vector<CellChange> out;
  for (const auto& c : j) {
    out.push_back({cell_from_json(c), value_from_json(c.at("before")),
                   value_from_json(c.at("after"))});
  }
  return out;
}

inline json to_json(const Rational& r) {
  return {{"num", r.numerator()}, {"den", r.denominator()}, {"decimal", to_double(r)}};
}

inline json task_json(const RepairTask& task) {
  json ids = json::array();
  for (const auto& dc : task.constraints) ids.push_back(dc.id);
  return {{"target", to_json(task.target)},
          {"dirty_value", to_json(task.dirty_value())},
          {"expected", to_json(task.expected)},
          {"constraints", std::move(ids)}};
}

inline json to_json(const ConstraintShapleyReport& report) {
  json values = json::array();
  for (std::size_t i = 0; i < report.players.size(); ++i) {
    values.push_back({{"player", report.players[i]}, {"value", to_json(report.values[i])}});
  }
  json ranking = json::array();
  for (const auto& r : rank(report)) ranking.push_back(r.player);
  return {{"task", task_json(report.task)},
          {"method", report.method},
          {"values", std::move(values)},
          {"ranking", std::move(ranking)}};
}

inline json to_json(const CellShapleyReport& report) {
  json values = json::array();
  for (std::size_t i = 0; i < report.players.size(); ++i) {
    json entry = {{"player", to_json(report.players[i])}};
    if (report.is_exact()) {
      entry["value"] = to_json(report.exact[i]);
    } else {
      entry["value"] = report.values[i];
      entry["stderr"] = report.std_errors[i];
    }
    values.push_back(std::move(entry));
  }
  json ranking = json::array();
  for (const auto& r : rank(report)) ranking.push_back(to_json(r.player));
  json out = {{"task", task_json(report.task)},
              {"method", report.method},
              {"imputation", std::string(to_string(report.imputation))},
              {"values", std::move(values)},
              {"ranking", std::move(ranking)}};
  if (!report.is_exact()) {
    out["samples"] = report.samples;
    out["seed"] = report.seed;
  }
  return out;
}

// Adapter protocol: one request document per line, one response per line.
inline json adapter_request(std::span<const DenialConstraint> constraints, const Table& table) {
  json dcs = json::array();
  for (const auto& dc : constraints) dcs.push_back(print_dc(dc));
  return {{"constraints", std::move(dcs)}, {"table", to_json(table)}};
}

}  // namespace dcshap::wire

#endif  // DCSHAP_WIRE_HPP
