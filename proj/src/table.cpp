#include "saeprobe/table.hpp"

#include <sstream>

#include "saeprobe/error.hpp"

namespace saeprobe {

using nlohmann::json;

Table Table::without_emphasis() const {
  Table out = *this;
  for (auto& row : out.rows) {
    for (auto& cell : row) cell.emphasis = false;
  }
  return out;
}

namespace {

void append_csv_field(std::string& out, std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos && (field.empty() || field.front() != '#')) {
    out.append(field);
    return;
  }
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

template <typename Range, typename Get>
void append_csv_row(std::string& out, const Range& range, Get get) {
  bool first = true;
  for (const auto& item : range) {
    if (!first) out.push_back(',');
    first = false;
    append_csv_field(out, get(item));
  }
  out.push_back('\n');
}

// Splits CSV text into records. Handles quoted fields spanning lines.
std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      record.push_back(std::move(field));
      field.clear();
      records.push_back(std::move(record));
      record.clear();
      field_started = false;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw Error(ErrorKind::schema, "unterminated quoted CSV field");
  if (field_started || !field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::string escape_markdown(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '|') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string to_csv(const Table& table) {
  std::string out;
  out += "# title: " + table.title + "\n";
  for (const auto& [key, value] : table.meta) out += "# " + key + ": " + value + "\n";
  append_csv_row(out, table.columns, [](const std::string& s) -> std::string_view { return s; });
  for (const auto& row : table.rows) {
    append_csv_row(out, row, [](const Cell& c) -> std::string_view { return c.text; });
  }
  return out;
}

Table table_from_csv(std::string_view document) {
  Table table;
  std::size_t pos = 0;
  bool saw_title = false;
  while (pos < document.size() && document[pos] == '#') {
    std::size_t end = document.find('\n', pos);
    if (end == std::string_view::npos) end = document.size();
    std::string_view line = document.substr(pos, end - pos);
    pos = end + 1;
    line.remove_prefix(line.size() > 1 && line[1] == ' ' ? 2 : 1);
    const std::size_t colon = line.find(": ");
    if (colon == std::string_view::npos) throw Error(ErrorKind::schema, "malformed CSV metadata line");
    std::string key(line.substr(0, colon));
    std::string value(line.substr(colon + 2));
    if (!saw_title && key == "title") {
      table.title = std::move(value);
      saw_title = true;
    } else {
      table.meta.emplace_back(std::move(key), std::move(value));
    }
  }
  auto records = parse_csv_records(document.substr(std::min(pos, document.size())));
  if (records.empty()) throw Error(ErrorKind::schema, "CSV document has no header row");
  table.columns = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.columns.size()) {
      throw Error(ErrorKind::schema, "CSV row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                                         " fields, expected " + std::to_string(table.columns.size()));
    }
    std::vector<Cell> row;
    for (auto& field : records[r]) row.push_back({std::move(field), false});
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

// Right-align columns whose filled cells all look like numbers.
bool numeric_column(const Table& table, std::size_t column) {
  bool any = false;
  for (const auto& row : table.rows) {
    if (column >= row.size() || row[column].text.empty()) continue;
    const std::string& text = row[column].text;
    if (text.find_first_not_of("0123456789.-%") != std::string::npos || text == "-") return false;
    any = true;
  }
  return any;
}

}  // namespace

std::string to_markdown(const Table& table) {
  std::ostringstream out;
  out << "### " << table.title << "\n\n|";
  for (const auto& column : table.columns) out << ' ' << escape_markdown(column) << " |";
  out << "\n|";
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << (numeric_column(table, i) ? " ---: |" : " --- |");
  out << '\n';
  for (const auto& row : table.rows) {
    out << '|';
    for (const auto& cell : row) {
      out << ' ';
      if (cell.emphasis && !cell.text.empty()) {
        out << "**" << escape_markdown(cell.text) << "**";
      } else {
        out << escape_markdown(cell.text);
      }
      out << " |";
    }
    out << '\n';
  }
  if (!table.meta.empty()) {
    out << '\n';
    for (const auto& [key, value] : table.meta) out << "_" << key << ": " << value << "_  \n";
  }
  return out.str();
}

json to_json(const Table& table) {
  json meta = json::array();
  for (const auto& [key, value] : table.meta) meta.push_back({{"key", key}, {"value", value}});
  json rows = json::array();
  json emphasized = json::array();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < table.rows[r].size(); ++c) {
      row.push_back(table.rows[r][c].text);
      if (table.rows[r][c].emphasis) emphasized.push_back({r, c});
    }
    rows.push_back(std::move(row));
  }
  return {{"title", table.title},
          {"meta", std::move(meta)},
          {"columns", table.columns},
          {"rows", std::move(rows)},
          {"emphasized", std::move(emphasized)}};
}

Table table_from_json(const json& value) {
  Table table;
  try {
    table.title = value.at("title").get<std::string>();
    for (const json& m : value.at("meta")) {
      table.meta.emplace_back(m.at("key").get<std::string>(), m.at("value").get<std::string>());
    }
    table.columns = value.at("columns").get<std::vector<std::string>>();
    for (const json& row : value.at("rows")) {
      std::vector<Cell> cells;
      for (const json& text : row) cells.push_back({text.get<std::string>(), false});
      table.rows.push_back(std::move(cells));
    }
    for (const json& at : value.at("emphasized")) {
      table.rows.at(at.at(0).get<std::size_t>()).at(at.at(1).get<std::size_t>()).emphasis = true;
    }
  } catch (const std::exception& e) {
    throw Error(ErrorKind::schema, std::string("table document: ") + e.what());
  }
  return table;
}

}  // namespace saeprobe
