#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "saeprobe/overlap.hpp"
#include "saeprobe/semantic.hpp"
#include "saeprobe/table.hpp"

namespace saeprobe {

inline constexpr int kBundleSchemaVersion = 1;

struct ReportBundle {
  int schema_version = kBundleSchemaVersion;
  std::string run_id;
  std::string created_at;
  nlohmann::json config_snapshot = nlohmann::json::object();
  std::map<std::string, std::string> labels;  // category id -> display name
  std::vector<OverlapReport> overlap;
  std::vector<SemanticTable> semantic;

  bool operator==(const ReportBundle&) const = default;
};

nlohmann::json to_json(const OverlapReport& report);
OverlapReport overlap_report_from_json(const nlohmann::json& value);
nlohmann::json to_json(const SemanticTable& table);
SemanticTable semantic_table_from_json(const nlohmann::json& value);

// Canonical bundle document with a SHA-256 checksum over everything else.
std::string serialize_bundle(const ReportBundle& bundle);
// Throws Error{schema} on malformed documents or an unsupported
// schema_version and Error{checksum} when the checksum does not match.
ReportBundle parse_bundle(std::string_view document);

// Raw/Index column pair per target; intra rows, a combined row, then the
// inter-group rows with half-up rounded indices. The largest index of each
// target is emphasized.
Table render_overlap_table(const ReportBundle& bundle);

// One row per target, "#Texts" and "% Crime" per religion. The row maximum
// share is emphasized (every tied cell; none when the maximum is 0).
Table render_crime_table(const ReportBundle& bundle);

// Long-format (religion, region, count, share_percent) rows per target,
// ordered by region then religion, zero counts included.
Table render_geo_chart_data(const ReportBundle& bundle, const SemanticTable& table);

// Grouped bar chart (regions on the x axis, one bar per religion).
std::string render_geo_svg(const ReportBundle& bundle, const SemanticTable& table);

// Filesystem-safe stem for per-target outputs.
std::string target_slug(const SaeTarget& target);

std::string format_fixed(double value, int decimals);

}  // namespace saeprobe
