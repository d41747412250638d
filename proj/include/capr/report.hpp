#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace capr {

using Cell = std::variant<double, std::int64_t, bool, std::string>;

/// Fixed-column report. CSV is a header plus one line per row; JSON is
/// {"columns": [...], "records": [{...}], "meta": {...}} or, for a flat
/// table, the single record as an object merged with meta.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::pair<std::string, Cell>> meta;
  bool flat = false;

  void add_row(std::vector<Cell> row);
};

enum class Format { csv, json, text };

Format parse_format(const std::string& name);

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

std::string emit_csv(const Table& t);
nlohmann::json emit_json(const Table& t);
std::string emit_text(const Table& t);
std::string emit(const Table& t, Format f);

}  // namespace capr
