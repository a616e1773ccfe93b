#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace saeprobe {

struct Cell {
  std::string text;
  bool emphasis = false;  // rendered bold in markdown, flagged in JSON; CSV drops it

  bool operator==(const Cell&) const = default;
};

// Format-neutral table document.
struct Table {
  std::string title;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  Table without_emphasis() const;
  bool operator==(const Table&) const = default;
};

// Metadata comes first as "# key: value" lines (title first), then the
// header row and the data rows, RFC 4180 quoted.
std::string to_csv(const Table& table);
Table table_from_csv(std::string_view document);

// Pipe table with emphasized cells in bold; metadata as footer lines.
std::string to_markdown(const Table& table);

nlohmann::json to_json(const Table& table);
Table table_from_json(const nlohmann::json& value);

}  // namespace saeprobe
