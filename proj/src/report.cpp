#include "saeprobe/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "saeprobe/error.hpp"
#include "saeprobe/hashing.hpp"

namespace saeprobe {

using nlohmann::json;

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string out = buf;
  if (out.rfind("-0", 0) == 0 && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
  return out;
}

namespace {

std::string format_count_like(double value) {
  if (value == std::floor(value)) return format_fixed(value, 0);
  return format_fixed(value, 2);
}

json policy_to_json(const MatchPolicy& policy) {
  return {{"case", "insensitive"},
          {"boundary", std::string(to_string(policy.boundary))},
          {"unicode_fold", policy.unicode_fold}};
}

MatchPolicy policy_from_json(const json& value) {
  return {boundary_from_string(value.at("boundary").get<std::string>()), value.at("unicode_fold").get<bool>()};
}

json crime_to_json(const CrimeShare& share) {
  return {{"text_count", share.text_count},
          {"unique_text_count", share.unique_text_count},
          {"crime_text_count", share.crime_text_count},
          {"crime_match_count", share.crime_match_count},
          {"crime_share_percent", share.crime_share_percent},
          {"mode", std::string(to_string(share.mode))},
          {"empty_corpus", share.empty_corpus}};
}

CrimeShare crime_from_json(const json& value) {
  CrimeShare share;
  share.text_count = value.at("text_count").get<std::uint64_t>();
  share.unique_text_count = value.at("unique_text_count").get<std::uint64_t>();
  share.crime_text_count = value.at("crime_text_count").get<std::uint64_t>();
  share.crime_match_count = value.at("crime_match_count").get<std::uint64_t>();
  share.crime_share_percent = value.at("crime_share_percent").get<double>();
  share.mode = value.at("mode").get<std::string>() == "matches_per_text" ? ShareMode::matches_per_text
                                                                          : ShareMode::texts_with_match;
  share.empty_corpus = value.at("empty_corpus").get<bool>();
  return share;
}

std::string label_of(const ReportBundle& bundle, const std::string& id) {
  auto it = bundle.labels.find(id);
  return it == bundle.labels.end() ? id : it->second;
}

std::string target_name(const SaeTarget& target) {
  return target.short_name.empty() ? target.label() : target.short_name;
}

std::string intra_definition_of(const ReportBundle& bundle) {
  if (!bundle.overlap.empty()) return std::string(to_string(bundle.overlap.front().intra_definition));
  return bundle.config_snapshot.value("intra_definition", std::string("multi_occurrence"));
}

std::string k_of(const ReportBundle& bundle) {
  if (!bundle.overlap.empty()) return std::to_string(bundle.overlap.front().k_used);
  return std::to_string(bundle.config_snapshot.value("k", 20));
}

std::vector<std::string> religion_order(const std::vector<std::vector<std::string>>& lists) {
  std::vector<std::string> out;
  for (const auto& list : lists) {
    for (const auto& r : list) {
      if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
    }
  }
  return out;
}

}  // namespace

json to_json(const OverlapReport& report) {
  return {{"target", to_json(report.target)},
          {"religions", report.religions},
          {"per_religion_intra", report.per_religion_intra},
          {"per_religion_union", report.per_religion_union},
          {"combined_unique", report.combined_unique},
          {"bias_union", report.bias_union},
          {"per_religion_inter", report.per_religion_inter},
          {"per_religion_vai", report.per_religion_vai},
          {"intra_definition", std::string(to_string(report.intra_definition))},
          {"k_used", report.k_used},
          {"pooled", report.pooled}};
}

OverlapReport overlap_report_from_json(const json& value) {
  OverlapReport report;
  report.target = target_from_json(value.at("target"));
  report.religions = value.at("religions").get<std::vector<std::string>>();
  report.per_religion_intra = value.at("per_religion_intra").get<std::map<std::string, double>>();
  report.per_religion_union = value.at("per_religion_union").get<std::map<std::string, std::uint64_t>>();
  report.combined_unique = value.at("combined_unique").get<std::uint64_t>();
  report.bias_union = value.at("bias_union").get<std::uint64_t>();
  report.per_religion_inter = value.at("per_religion_inter").get<std::map<std::string, std::uint64_t>>();
  report.per_religion_vai = value.at("per_religion_vai").get<std::map<std::string, double>>();
  report.intra_definition = intra_definition_from_string(value.at("intra_definition").get<std::string>());
  report.k_used = value.at("k_used").get<std::size_t>();
  report.pooled = value.at("pooled").get<bool>();
  return report;
}

json to_json(const SemanticTable& table) {
  json crime = json::object();
  for (const auto& [religion, share] : table.crime) crime[religion] = crime_to_json(share);
  return {{"target", to_json(table.target)},
          {"religions", table.religions},
          {"regions", table.regions},
          {"crime", std::move(crime)},
          {"geo", table.geo},
          {"policy", policy_to_json(table.policy)},
          {"geo_mode", std::string(to_string(table.geo_mode))},
          {"deduplicated", table.deduplicated}};
}

SemanticTable semantic_table_from_json(const json& value) {
  SemanticTable table;
  table.target = target_from_json(value.at("target"));
  table.religions = value.at("religions").get<std::vector<std::string>>();
  table.regions = value.at("regions").get<std::vector<std::string>>();
  for (const auto& [religion, share] : value.at("crime").items()) table.crime[religion] = crime_from_json(share);
  table.geo = value.at("geo").get<std::map<std::string, std::map<std::string, std::uint64_t>>>();
  table.policy = policy_from_json(value.at("policy"));
  table.geo_mode = value.at("geo_mode").get<std::string>() == "distinct_texts" ? GeoCountMode::distinct_texts
                                                                                : GeoCountMode::occurrences;
  table.deduplicated = value.at("deduplicated").get<bool>();
  return table;
}

std::string serialize_bundle(const ReportBundle& bundle) {
  json overlap = json::array();
  for (const auto& report : bundle.overlap) overlap.push_back(to_json(report));
  json semantic = json::array();
  for (const auto& table : bundle.semantic) semantic.push_back(to_json(table));
  json doc = {{"schema_version", bundle.schema_version},
              {"run_id", bundle.run_id},
              {"created_at", bundle.created_at},
              {"config_snapshot", bundle.config_snapshot},
              {"labels", bundle.labels},
              {"overlap", std::move(overlap)},
              {"semantic", std::move(semantic)}};
  doc["checksum"] = sha256_hex(canonical_dump(doc));
  return canonical_dump(doc);
}

ReportBundle parse_bundle(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::checksum, std::string("bundle is unreadable (corrupted?): ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version")) {
    throw Error(ErrorKind::schema, "bundle lacks schema_version");
  }
  const json version = doc["schema_version"];
  if (version != kBundleSchemaVersion) {
    throw Error(ErrorKind::schema, "bundle schema_version " + version.dump() + " cannot be migrated to version " +
                                       std::to_string(kBundleSchemaVersion) + "; re-run analyze");
  }
  if (!doc.contains("checksum") || !doc["checksum"].is_string()) {
    throw Error(ErrorKind::checksum, "bundle has no checksum");
  }
  const std::string stored = doc["checksum"].get<std::string>();
  doc.erase("checksum");
  if (sha256_hex(canonical_dump(doc)) != stored) throw Error(ErrorKind::checksum, "bundle checksum mismatch");

  ReportBundle bundle;
  try {
    bundle.schema_version = version.get<int>();
    bundle.run_id = doc.at("run_id").get<std::string>();
    bundle.created_at = doc.at("created_at").get<std::string>();
    bundle.config_snapshot = doc.at("config_snapshot");
    bundle.labels = doc.at("labels").get<std::map<std::string, std::string>>();
    for (const json& r : doc.at("overlap")) bundle.overlap.push_back(overlap_report_from_json(r));
    for (const json& t : doc.at("semantic")) bundle.semantic.push_back(semantic_table_from_json(t));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, std::string("bundle: ") + e.what());
  }
  return bundle;
}

Table render_overlap_table(const ReportBundle& bundle) {
  Table table;
  table.title = "Latent feature overlap";
  table.meta = {{"schema_version", std::to_string(bundle.schema_version)},
                {"intra_definition", intra_definition_of(bundle)},
                {"k", k_of(bundle)}};
  table.columns = {"Section", "Category"};
  for (const auto& report : bundle.overlap) {
    const std::string name = target_name(report.target);
    table.columns.push_back(name + " Raw");
    table.columns.push_back(name + " Index");
  }
  if (bundle.overlap.empty()) return table;

  std::vector<std::vector<std::string>> lists;
  for (const auto& report : bundle.overlap) lists.push_back(report.religions);
  const std::vector<std::string> religions = religion_order(lists);

  for (const auto& religion : religions) {
    std::vector<Cell> row = {{"intra"}, {label_of(bundle, religion)}};
    for (const auto& report : bundle.overlap) {
      auto it = report.per_religion_intra.find(religion);
      row.push_back({it == report.per_religion_intra.end() ? "" : format_count_like(it->second)});
      row.push_back({""});
    }
    table.rows.push_back(std::move(row));
  }
  std::vector<Cell> combined = {{"intra"}, {"All Religions Combined"}};
  for (const auto& report : bundle.overlap) {
    combined.push_back({std::to_string(report.combined_unique)});
    combined.push_back({""});
  }
  table.rows.push_back(std::move(combined));

  for (const auto& religion : religions) {
    std::vector<Cell> row = {{"inter"}, {label_of(bundle, religion)}};
    for (const auto& report : bundle.overlap) {
      auto raw = report.per_religion_inter.find(religion);
      auto vai = report.per_religion_vai.find(religion);
      bool top = false;
      if (vai != report.per_religion_vai.end()) {
        const auto max_vai = std::max_element(report.per_religion_vai.begin(), report.per_religion_vai.end(),
                                              [](const auto& a, const auto& b) { return a.second < b.second; });
        top = round_half_up(vai->second) == round_half_up(max_vai->second);
      }
      row.push_back({raw == report.per_religion_inter.end() ? "" : std::to_string(raw->second), top});
      row.push_back({vai == report.per_religion_vai.end() ? (raw == report.per_religion_inter.end() ? "" : "n/a")
                                                          : std::to_string(round_half_up(vai->second)),
                     top});
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Table render_crime_table(const ReportBundle& bundle) {
  Table table;
  table.title = "Crime-related activation text share";
  std::string mode = "texts_with_match";
  std::string policy = describe(MatchPolicy{});
  if (!bundle.semantic.empty()) {
    const auto& first = bundle.semantic.front();
    policy = describe(first.policy);
    if (!first.crime.empty()) mode = std::string(to_string(first.crime.begin()->second.mode));
  }
  table.meta = {{"schema_version", std::to_string(bundle.schema_version)},
                {"intra_definition", intra_definition_of(bundle)},
                {"share_mode", mode},
                {"match_policy", policy}};

  std::vector<std::vector<std::string>> lists;
  for (const auto& t : bundle.semantic) lists.push_back(t.religions);
  const std::vector<std::string> religions = religion_order(lists);

  table.columns = {"Model"};
  for (const auto& religion : religions) {
    table.columns.push_back(label_of(bundle, religion) + " #Texts");
    table.columns.push_back(label_of(bundle, religion) + " % Crime");
  }
  for (const auto& t : bundle.semantic) {
    std::vector<Cell> row = {{target_name(t.target)}};
    double row_max = 0.0;
    for (const auto& [religion, share] : t.crime) row_max = std::max(row_max, share.crime_share_percent);
    for (const auto& religion : religions) {
      auto it = t.crime.find(religion);
      if (it == t.crime.end()) {
        row.push_back({""});
        row.push_back({""});
        continue;
      }
      const std::string pct = format_fixed(it->second.crime_share_percent, 2);
      const bool top = row_max > 0.0 && pct == format_fixed(row_max, 2);
      row.push_back({std::to_string(it->second.text_count)});
      row.push_back({pct + "%", top});
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Table render_geo_chart_data(const ReportBundle& bundle, const SemanticTable& t) {
  Table table;
  table.title = "Geographic keyword mentions: " + target_name(t.target);
  table.meta = {{"schema_version", std::to_string(bundle.schema_version)},
                {"intra_definition", intra_definition_of(bundle)},
                {"target", t.target.label()},
                {"geo_count_mode", std::string(to_string(t.geo_mode))},
                {"match_policy", describe(t.policy)}};
  table.columns = {"religion", "region", "count", "share_percent"};
  std::map<std::string, GeoShares> shares;
  for (const auto& religion : t.religions) {
    auto it = t.geo.find(religion);
    shares[religion] = geo_shares(it == t.geo.end() ? std::map<std::string, std::uint64_t>{} : it->second);
  }
  for (const auto& region : t.regions) {
    for (const auto& religion : t.religions) {
      std::uint64_t count = 0;
      if (auto r = t.geo.find(religion); r != t.geo.end()) {
        if (auto c = r->second.find(region); c != r->second.end()) count = c->second;
      }
      const auto& pct = shares[religion].percent;
      auto s = pct.find(region);
      table.rows.push_back({{label_of(bundle, religion)},
                            {label_of(bundle, region)},
                            {std::to_string(count)},
                            {format_fixed(s == pct.end() ? 0.0 : s->second, 2)}});
    }
  }
  return table;
}

std::string target_slug(const SaeTarget& target) {
  std::string slug = target.model_id + "_" + target.source_set;
  for (char& c : slug) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '_' && c != '-') c = '-';
  }
  return slug;
}

namespace {

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Round step (1, 2 or 5 times a power of ten) giving about five ticks.
double tick_step(double max_value) {
  if (max_value <= 0) return 1.0;
  const double raw = max_value / 5.0;
  const double magnitude = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * magnitude) return std::max(1.0, m * magnitude);
  }
  return std::max(1.0, 10.0 * magnitude);
}

}  // namespace

std::string render_geo_svg(const ReportBundle& bundle, const SemanticTable& t) {
  static constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759",
                                             "#76b7b2", "#edc948", "#b07aa1", "#9c755f"};
  constexpr double width = 960, height = 520;
  constexpr double left = 70, right = 170, top = 50, bottom = 80;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  std::uint64_t max_count = 0;
  for (const auto& [religion, row] : t.geo) {
    for (const auto& [region, count] : row) max_count = std::max(max_count, count);
  }
  const double step = tick_step(static_cast<double>(max_count));
  const double axis_max = std::max(step, std::ceil(static_cast<double>(max_count) / step) * step);

  std::ostringstream svg;
  auto f = [](double v) { return format_fixed(v, 2); };
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f(width) << "\" height=\"" << f(height)
      << "\" viewBox=\"0 0 " << f(width) << ' ' << f(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<!-- schema_version: " << bundle.schema_version << "; intra_definition: " << intra_definition_of(bundle)
      << " -->\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << f(width) << "\" height=\"" << f(height) << "\" fill=\"#ffffff\"/>\n";
  svg << "<text x=\"" << f(width / 2) << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">"
      << xml_escape("Geographic keyword mentions by religion: " + target_name(t.target)) << "</text>\n";

  for (double v = 0; v <= axis_max + 1e-9; v += step) {
    const double y = top + plot_h - v / axis_max * plot_h;
    svg << "<line x1=\"" << f(left) << "\" y1=\"" << f(y) << "\" x2=\"" << f(left + plot_w) << "\" y2=\"" << f(y)
        << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << f(left - 8) << "\" y=\"" << f(y + 4) << "\" text-anchor=\"end\">" << format_fixed(v, 0)
        << "</text>\n";
  }
  svg << "<line x1=\"" << f(left) << "\" y1=\"" << f(top) << "\" x2=\"" << f(left) << "\" y2=\"" << f(top + plot_h)
      << "\" stroke=\"#333333\"/>\n";
  svg << "<line x1=\"" << f(left) << "\" y1=\"" << f(top + plot_h) << "\" x2=\"" << f(left + plot_w) << "\" y2=\""
      << f(top + plot_h) << "\" stroke=\"#333333\"/>\n";
  svg << "<text transform=\"translate(18 " << f(top + plot_h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << "Mentions</text>\n";
  svg << "<text x=\"" << f(left + plot_w / 2) << "\" y=\"" << f(height - 20) << "\" text-anchor=\"middle\">"
      << "Region</text>\n";

  const std::size_t groups = std::max<std::size_t>(1, t.regions.size());
  const std::size_t bars = std::max<std::size_t>(1, t.religions.size());
  const double group_w = plot_w / static_cast<double>(groups);
  const double bar_w = group_w * 0.8 / static_cast<double>(bars);
  for (std::size_t g = 0; g < t.regions.size(); ++g) {
    const double gx = left + group_w * static_cast<double>(g) + group_w * 0.1;
    for (std::size_t b = 0; b < t.religions.size(); ++b) {
      std::uint64_t count = 0;
      if (auto r = t.geo.find(t.religions[b]); r != t.geo.end()) {
        if (auto c = r->second.find(t.regions[g]); c != r->second.end()) count = c->second;
      }
      const double h = static_cast<double>(count) / axis_max * plot_h;
      svg << "<rect x=\"" << f(gx + bar_w * static_cast<double>(b)) << "\" y=\"" << f(top + plot_h - h)
          << "\" width=\"" << f(bar_w) << "\" height=\"" << f(h) << "\" fill=\"" << kPalette[b % 8] << "\"><title>"
          << xml_escape(label_of(bundle, t.religions[b]) + " / " + label_of(bundle, t.regions[g]) + ": " +
                        std::to_string(count))
          << "</title></rect>\n";
    }
    svg << "<text x=\"" << f(gx + group_w * 0.4) << "\" y=\"" << f(top + plot_h + 18)
        << "\" text-anchor=\"middle\">" << xml_escape(label_of(bundle, t.regions[g])) << "</text>\n";
  }
  for (std::size_t b = 0; b < t.religions.size(); ++b) {
    const double y = top + 10 + 20 * static_cast<double>(b);
    svg << "<rect x=\"" << f(width - right + 20) << "\" y=\"" << f(y) << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[b % 8] << "\"/>\n";
    svg << "<text x=\"" << f(width - right + 38) << "\" y=\"" << f(y + 10) << "\">"
        << xml_escape(label_of(bundle, t.religions[b])) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace saeprobe
