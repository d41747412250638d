#include "capr/report.hpp"

#include "capr/common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace capr {

void Table::add_row(std::vector<Cell> row) {
  require(row.size() == columns.size(), "row width does not match the columns");
  rows.push_back(std::move(row));
}

Format parse_format(const std::string& name) {
  if (name == "csv") return Format::csv;
  if (name == "json") return Format::json;
  if (name == "text") return Format::text;
  throw Error(ErrorKind::precondition, "unknown format '" + name + "'");
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string cell_text(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>)
          return format_number(v);
        else if constexpr (std::is_same_v<T, bool>)
          return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::int64_t>)
          return std::to_string(v);
        else
          return v;
      },
      c);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

nlohmann::json cell_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) {
          if (!std::isfinite(v)) return format_number(v);
          return v;
        } else {
          return v;
        }
      },
      c);
}

}  // namespace

std::string emit_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    out += (i ? "," : "") + csv_field(t.columns[i]);
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(cell_text(row[i]));
    out += "\n";
  }
  return out;
}

nlohmann::json emit_json(const Table& t) {
  using nlohmann::json;
  if (t.flat) {
    require(t.rows.size() == 1, "a flat table holds exactly one row");
    json out = json::object();
    for (std::size_t i = 0; i < t.columns.size(); ++i) out[t.columns[i]] = cell_json(t.rows[0][i]);
    for (const auto& [k, v] : t.meta) out[k] = cell_json(v);
    return out;
  }
  json out;
  out["columns"] = t.columns;
  out["records"] = json::array();
  for (const auto& row : t.rows) {
    json r = json::object();
    for (std::size_t i = 0; i < t.columns.size(); ++i) r[t.columns[i]] = cell_json(row[i]);
    out["records"].push_back(std::move(r));
  }
  if (!t.meta.empty()) {
    out["meta"] = json::object();
    for (const auto& [k, v] : t.meta) out["meta"][k] = cell_json(v);
  }
  return out;
}

std::string emit_text(const Table& t) {
  std::vector<std::size_t> width(t.columns.size());
  std::vector<std::vector<std::string>> cells;
  for (std::size_t i = 0; i < t.columns.size(); ++i) width[i] = t.columns[i].size();
  for (const auto& row : t.rows) {
    cells.emplace_back();
    for (std::size_t i = 0; i < row.size(); ++i) {
      cells.back().push_back(cell_text(row[i]));
      width[i] = std::max(width[i], cells.back().back().size());
    }
  }
  std::ostringstream os;
  const auto line = [&](const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      os << v[i];
      if (i + 1 < v.size()) os << std::string(width[i] - v[i].size() + 2, ' ');
    }
    os << "\n";
  };
  line(t.columns);
  for (const auto& c : cells) line(c);
  for (const auto& [k, v] : t.meta) os << k << ": " << cell_text(v) << "\n";
  return os.str();
}

std::string emit(const Table& t, Format f) {
  switch (f) {
    case Format::csv: return emit_csv(t);
    case Format::json: return emit_json(t).dump(2) + "\n";
    case Format::text: return emit_text(t);
  }
  return {};
}

}  // namespace capr
