#include "saeprobe/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <future>
#include <ostream>
#include <set>
#include <sstream>

#include "saeprobe/error.hpp"
#include "saeprobe/fixture_store.hpp"
#include "saeprobe/hashing.hpp"
#include "saeprobe/live_source.hpp"
#include "saeprobe/synthetic_source.hpp"
#include "saeprobe/table.hpp"

#ifndef SAEPROBE_DATA_DIR
#define SAEPROBE_DATA_DIR "data"
#endif

namespace saeprobe {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kSyntheticTimestamp = "1970-01-01T00:00:00Z";
constexpr int kManifestSchemaVersion = 1;

const std::vector<std::string> kKnownFormats = {"csv", "md", "json", "svg"};

ShareMode share_mode_from_string(std::string_view name) {
  if (name == "texts_with_match") return ShareMode::texts_with_match;
  if (name == "matches_per_text") return ShareMode::matches_per_text;
  throw Error(ErrorKind::usage, "unknown share mode '" + std::string(name) + "'");
}

GeoCountMode geo_mode_from_string(std::string_view name) {
  if (name == "occurrences") return GeoCountMode::occurrences;
  if (name == "distinct_texts") return GeoCountMode::distinct_texts;
  throw Error(ErrorKind::usage, "unknown geo count mode '" + std::string(name) + "'");
}

template <typename T>
T get_as(const json& doc, const char* key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::configuration, std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::live: return "live";
    case Backend::fixture: return "fixture";
    case Backend::synthetic: return "synthetic";
  }
  return "synthetic";
}

Backend backend_from_string(std::string_view name) {
  if (name == "live") return Backend::live;
  if (name == "fixture") return Backend::fixture;
  if (name == "synthetic") return Backend::synthetic;
  throw Error(ErrorKind::usage, "unknown backend '" + std::string(name) + "' (live|fixture|synthetic)");
}

RunConfig default_run_config() {
  RunConfig config;
  config.lexicon_path = fs::path(SAEPROBE_DATA_DIR) / "lexicons.json";
  config.registry_path = fs::path(SAEPROBE_DATA_DIR) / "sae_targets.json";
  return config;
}

json to_json(const RunConfig& config) {
  json doc = {{"targets", config.targets},
              {"lexicons", config.lexicon_path.generic_string()},
              {"registry", config.registry_path.generic_string()},
              {"k", config.k},
              {"intra_def", std::string(to_string(config.intra_definition))},
              {"match_boundary", std::string(to_string(config.match_policy.boundary))},
              {"unicode_fold", config.match_policy.unicode_fold},
              {"share_mode", std::string(to_string(config.share_mode))},
              {"geo_mode", std::string(to_string(config.geo_mode))},
              {"deduplicate", config.deduplicate},
              {"backend", std::string(to_string(config.backend))},
              {"cache_dir", config.cache_dir.generic_string()},
              {"out", config.output_dir.generic_string()},
              {"fixtures", config.fixtures_dir.generic_string()},
              {"synthetic_spec", config.synthetic_spec_path.generic_string()},
              {"seed", config.seed ? json(*config.seed) : json(nullptr)},
              {"rate_limit", config.rate_limit_rps},
              {"formats", config.formats},
              {"religions", config.religions ? json(*config.religions) : json(nullptr)},
              {"pooled", config.pooled},
              {"texts_per_feature", config.texts_per_feature ? json(*config.texts_per_feature) : json(nullptr)}};
  return doc;
}

RunConfig apply_config_json(RunConfig base, const json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::configuration, "config file must hold a JSON object");
  static const std::set<std::string> known = {
      "targets",  "lexicons",  "registry", "k",        "intra_def",      "match_boundary", "unicode_fold",
      "share_mode", "geo_mode", "deduplicate", "backend", "cache_dir",  "out",            "fixtures",
      "synthetic_spec", "seed", "rate_limit", "formats", "religions",    "pooled",         "texts_per_feature"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw Error(ErrorKind::configuration, "unknown config key '" + key + "'");
  }
  RunConfig c = std::move(base);
  if (doc.contains("targets")) c.targets = get_as<std::vector<std::string>>(doc, "targets");
  if (doc.contains("lexicons")) c.lexicon_path = get_as<std::string>(doc, "lexicons");
  if (doc.contains("registry")) c.registry_path = get_as<std::string>(doc, "registry");
  if (doc.contains("k")) c.k = get_as<std::size_t>(doc, "k");
  if (doc.contains("intra_def")) c.intra_definition = intra_definition_from_string(get_as<std::string>(doc, "intra_def"));
  if (doc.contains("match_boundary")) {
    c.match_policy.boundary = boundary_from_string(get_as<std::string>(doc, "match_boundary"));
  }
  if (doc.contains("unicode_fold")) c.match_policy.unicode_fold = get_as<bool>(doc, "unicode_fold");
  if (doc.contains("share_mode")) c.share_mode = share_mode_from_string(get_as<std::string>(doc, "share_mode"));
  if (doc.contains("geo_mode")) c.geo_mode = geo_mode_from_string(get_as<std::string>(doc, "geo_mode"));
  if (doc.contains("deduplicate")) c.deduplicate = get_as<bool>(doc, "deduplicate");
  if (doc.contains("backend")) c.backend = backend_from_string(get_as<std::string>(doc, "backend"));
  if (doc.contains("cache_dir")) c.cache_dir = get_as<std::string>(doc, "cache_dir");
  if (doc.contains("out")) c.output_dir = get_as<std::string>(doc, "out");
  if (doc.contains("fixtures")) c.fixtures_dir = get_as<std::string>(doc, "fixtures");
  if (doc.contains("synthetic_spec")) c.synthetic_spec_path = get_as<std::string>(doc, "synthetic_spec");
  if (doc.contains("seed")) {
    c.seed = doc["seed"].is_null() ? std::nullopt : std::optional(get_as<std::uint64_t>(doc, "seed"));
  }
  if (doc.contains("rate_limit")) c.rate_limit_rps = get_as<double>(doc, "rate_limit");
  if (doc.contains("formats")) c.formats = get_as<std::vector<std::string>>(doc, "formats");
  if (doc.contains("religions")) {
    c.religions = doc["religions"].is_null() ? std::nullopt
                                             : std::optional(get_as<std::vector<std::string>>(doc, "religions"));
  }
  if (doc.contains("pooled")) c.pooled = get_as<bool>(doc, "pooled");
  if (doc.contains("texts_per_feature")) {
    c.texts_per_feature = doc["texts_per_feature"].is_null()
                              ? std::nullopt
                              : std::optional(get_as<std::size_t>(doc, "texts_per_feature"));
  }
  return c;
}

RunConfig load_config_file(RunConfig base, const fs::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::configuration, "config file " + path.string() + ": " + e.what());
  }
  return apply_config_json(std::move(base), doc);
}

std::optional<std::string> api_key_from_env() {
  const char* value = std::getenv(kApiKeyEnvVar);
  if (value == nullptr || *value == '\0') return std::nullopt;
  return std::string(value);
}

void validate_run_config(const RunConfig& config, const std::optional<std::string>& api_key, Stage stage) {
  if (config.k == 0) throw Error(ErrorKind::validation, "k must be positive");
  if (config.targets.empty()) throw Error(ErrorKind::validation, "no targets selected");
  if (!(config.rate_limit_rps > 0)) throw Error(ErrorKind::validation, "rate limit must be positive");
  if (config.religions && config.religions->empty()) {
    throw Error(ErrorKind::validation, "religion selection is empty");
  }
  for (const auto& format : config.formats) {
    if (std::find(kKnownFormats.begin(), kKnownFormats.end(), format) == kKnownFormats.end()) {
      throw Error(ErrorKind::usage, "unknown format '" + format + "' (csv|md|json|svg)");
    }
  }
  if (stage != Stage::collect) return;
  if (config.backend == Backend::live && !api_key) {
    throw Error(ErrorKind::configuration,
                std::string("live backend needs the ") + kApiKeyEnvVar + " environment variable");
  }
  if (config.backend == Backend::synthetic && !config.seed) {
    throw Error(ErrorKind::configuration, "synthetic backend needs --seed");
  }
  if (config.backend == Backend::fixture && config.fixtures_dir.empty()) {
    throw Error(ErrorKind::configuration, "fixture backend needs --fixtures");
  }
}

RunContext load_context(const RunConfig& config) {
  RunContext ctx;
  ctx.config = config;
  ctx.lexicons = load_lexicons(config.lexicon_path);
  ctx.registry = TargetRegistry::load(config.registry_path);

  std::set<TargetId> seen;
  for (const auto& selector : config.targets) {
    for (auto& target : ctx.registry.select(selector)) {
      if (seen.insert(target.id()).second) ctx.targets.push_back(std::move(target));
    }
  }

  if (!config.religions) {
    ctx.religions = lexicons_of_kind(ctx.lexicons, LexiconKind::religion);
  } else {
    for (const auto& name : *config.religions) {
      const ConceptLexicon& lexicon = find_lexicon(ctx.lexicons, name);
      if (lexicon.kind != LexiconKind::religion) {
        throw Error(ErrorKind::validation, "'" + name + "' is not a religion lexicon");
      }
      ctx.religions.push_back(lexicon);
    }
  }
  if (ctx.religions.empty()) throw Error(ErrorKind::validation, "religion selection is empty");

  auto single = [&](LexiconKind kind) {
    auto found = lexicons_of_kind(ctx.lexicons, kind);
    if (found.size() != 1) {
      throw Error(ErrorKind::validation, "expected exactly one " + std::string(to_string(kind)) + " lexicon, found " +
                                             std::to_string(found.size()));
    }
    return found.front();
  };
  ctx.bias = single(LexiconKind::bias_probe);
  ctx.crime = single(LexiconKind::crime_index);
  ctx.regions = lexicons_of_kind(ctx.lexicons, LexiconKind::geo_region);
  return ctx;
}

std::vector<CollectionCell> collection_grid(const RunContext& context) {
  std::vector<CollectionCell> grid;
  for (const auto& target : context.targets) {
    for (const auto& religion : context.religions) {
      for (auto& prompt : render_prompts(religion)) grid.push_back({target, std::move(prompt)});
    }
    for (auto& prompt : render_prompts(context.bias)) grid.push_back({target, std::move(prompt)});
  }
  return grid;
}

std::shared_ptr<ActivationSource> make_source(const RunContext& context) {
  const RunConfig& config = context.config;
  switch (config.backend) {
    case Backend::synthetic: {
      SyntheticSpec spec = config.synthetic_spec_path.empty()
                               ? default_synthetic_spec(context.lexicons)
                               : parse_synthetic_spec(read_file(config.synthetic_spec_path), context.lexicons);
      if (config.texts_per_feature) spec.texts_per_feature = *config.texts_per_feature;
      if (!config.seed) throw Error(ErrorKind::configuration, "synthetic backend needs --seed");
      return std::make_shared<SyntheticSource>(std::move(spec), *config.seed, context.registry);
    }
    case Backend::fixture:
      return std::make_shared<FixtureSource>(config.fixtures_dir);
    case Backend::live: {
      auto key = api_key_from_env();
      if (!key) {
        throw Error(ErrorKind::configuration,
                    std::string("live backend needs the ") + kApiKeyEnvVar + " environment variable");
      }
      LiveSourceConfig live;
      live.api_key = *key;
      live.rate_limit_rps = config.rate_limit_rps;
      if (config.texts_per_feature) live.texts_per_feature = *config.texts_per_feature;
      auto transport = make_http_transport(live.adapter.base_url, std::chrono::seconds(30));
      return std::make_shared<LiveSource>(std::move(live), context.registry, std::move(transport));
    }
  }
  throw Error(ErrorKind::configuration, "unsupported backend");
}

CollectResult cmd_collect(const RunContext& context, std::shared_ptr<ActivationSource> inner, std::ostream& log) {
  const RunConfig& config = context.config;
  fs::create_directories(config.cache_dir);
  auto cache = std::make_shared<CachedSource>(std::move(inner), config.cache_dir);

  CollectResult result;
  const auto grid = collection_grid(context);
  result.cells = grid.size();
  json entries = json::array();
  for (const auto& cell : grid) {
    const CacheKey key{cell.target.id(), cell.prompt.text, config.k};
    json entry = {{"target", cell.target.label()},
                  {"category", cell.prompt.category_id},
                  {"term", cell.prompt.term},
                  {"prompt", cell.prompt.text},
                  {"cache_file", cache_entry_path(config.cache_dir, key).filename().generic_string()}};
    try {
      const ActivationRecord record = cache->fetch_top_features(cell.target, cell.prompt, config.k);
      entry["status"] = "ok";
      entry["features"] = record.features.size();
    } catch (const Error& e) {
      entry["status"] = "failed";
      entry["error"] = e.what();
      result.failures.push_back({cell, e.kind(), e.what()});
    }
    entries.push_back(std::move(entry));
  }
  result.hits = cache->hits();
  result.misses = cache->misses();

  json manifest = {{"schema_version", kManifestSchemaVersion},
                   {"backend", std::string(to_string(config.backend))},
                   {"k", config.k},
                   {"seed", config.seed ? json(*config.seed) : json(nullptr)},
                   {"targets", json::array()},
                   {"cells", result.cells},
                   {"succeeded", result.cells - result.failures.size()},
                   {"failed", result.failures.size()},
                   {"entries", std::move(entries)}};
  for (const auto& target : context.targets) manifest["targets"].push_back(target.label());
  result.manifest_path = config.cache_dir / "manifest.json";
  write_file_atomic(result.manifest_path, canonical_dump(manifest));

  log << "collected " << result.cells - result.failures.size() << "/" << result.cells << " cells (" << result.hits
      << " cached, " << result.misses << " fetched) into " << config.cache_dir.generic_string() << "\n";
  for (const auto& failure : result.failures) {
    log << "  failed: " << failure.cell.target.label() << " | " << failure.cell.prompt.text << " | "
        << failure.message << "\n";
  }
  return result;
}

CollectResult cmd_collect(const RunConfig& config, std::ostream& log) {
  validate_run_config(config, api_key_from_env());
  const RunContext context = load_context(config);
  return cmd_collect(context, make_source(context), log);
}

namespace {

struct TargetAnalysis {
  OverlapReport overlap;
  SemanticTable semantic;
  std::vector<ActivationRecord> religion_records;  // flattened, for pooling
  std::vector<ActivationRecord> bias_records;
};

TargetAnalysis analyze_target(const RunContext& ctx, const SaeTarget& target, FixtureSource& cache) {
  const RunConfig& config = ctx.config;
  TargetAnalysis out;
  std::vector<ReligionRecords> groups;
  std::vector<TextCorpus> corpora;
  for (const auto& religion : ctx.religions) {
    ReligionRecords group{religion.category_id, {}};
    for (const auto& prompt : render_prompts(religion)) {
      group.records.push_back(cache.fetch_top_features(target, prompt, config.k));
    }
    corpora.push_back(build_corpus(target, religion.category_id, group.records, config.k));
    out.religion_records.insert(out.religion_records.end(), group.records.begin(), group.records.end());
    groups.push_back(std::move(group));
  }
  for (const auto& prompt : render_prompts(ctx.bias)) {
    out.bias_records.push_back(cache.fetch_top_features(target, prompt, config.k));
  }
  out.overlap = compute_overlap_report(target, groups, out.bias_records, config.intra_definition, config.k);
  const SemanticOptions options{config.match_policy, config.share_mode, config.geo_mode, config.deduplicate};
  out.semantic = compute_semantic_table(target, corpora, ctx.crime, ctx.regions, options);
  return out;
}

OverlapReport pooled_report(const RunContext& ctx, const std::string& model_id,
                            const std::vector<const TargetAnalysis*>& parts) {
  SaeTarget pooled;
  pooled.model_id = model_id;
  pooled.source_set = std::string(kPooledSourceSet);
  pooled.short_name = model_id + " (pooled)";
  for (const auto* part : parts) pooled.feature_count += part->overlap.target.feature_count;

  std::vector<ReligionRecords> groups;
  for (const auto& religion : ctx.religions) {
    ReligionRecords group{religion.category_id, {}};
    for (const auto* part : parts) {
      for (const auto& record : part->religion_records) {
        if (record.prompt.category_id == religion.category_id) group.records.push_back(record);
      }
    }
    group.records = pool_by_model(group.records);
    groups.push_back(std::move(group));
  }
  std::vector<ActivationRecord> bias;
  for (const auto* part : parts) bias.insert(bias.end(), part->bias_records.begin(), part->bias_records.end());
  bias = pool_by_model(bias);
  for (auto& group : groups) {
    for (auto& record : group.records) record.target = pooled;
  }
  for (auto& record : bias) record.target = pooled;
  OverlapReport report = compute_overlap_report(pooled, groups, bias, ctx.config.intra_definition, ctx.config.k);
  report.pooled = true;
  return report;
}

}  // namespace

ReportBundle analyze(const RunContext& ctx) {
  const RunConfig& config = ctx.config;
  FixtureSource cache(config.cache_dir);

  std::vector<std::string> missing;
  for (const auto& cell : collection_grid(ctx)) {
    if (!cache.contains(cell.target, cell.prompt, config.k)) {
      missing.push_back(cell.target.label() + " | " + cell.prompt.text);
    }
  }
  if (!missing.empty()) {
    std::string message = std::to_string(missing.size()) + " (target, prompt) cells are missing from " +
                          config.cache_dir.generic_string() + "; run collect first:";
    for (const auto& m : missing) message += "\n  " + m;
    throw Error(ErrorKind::missing_data, message);
  }

  // One task per target; results are gathered in target order so output stays deterministic.
  std::vector<std::future<TargetAnalysis>> tasks;
  for (const auto& target : ctx.targets) {
    tasks.push_back(std::async(std::launch::async, [&ctx, &target] {
      FixtureSource reader(ctx.config.cache_dir);
      return analyze_target(ctx, target, reader);
    }));
  }
  std::vector<TargetAnalysis> results;
  for (auto& task : tasks) results.push_back(task.get());

  ReportBundle bundle;
  json snapshot = to_json(config);
  snapshot["lexicon_sha256"] = sha256_hex(serialize_lexicons(ctx.lexicons));
  snapshot["resolved_targets"] = json::array();
  for (const auto& target : ctx.targets) snapshot["resolved_targets"].push_back(to_json(target));
  bundle.config_snapshot = snapshot;
  bundle.run_id = sha256_hex(canonical_dump(snapshot)).substr(0, 16);
  bundle.created_at = config.backend == Backend::synthetic ? kSyntheticTimestamp : utc_timestamp_now();
  for (const auto& lexicon : ctx.lexicons) bundle.labels[lexicon.category_id] = lexicon.display_name;

  for (const auto& r : results) {
    bundle.overlap.push_back(r.overlap);
    bundle.semantic.push_back(r.semantic);
  }
  if (config.pooled) {
    std::vector<std::string> models;
    for (const auto& target : ctx.targets) {
      if (std::find(models.begin(), models.end(), target.model_id) == models.end()) models.push_back(target.model_id);
    }
    for (const auto& model : models) {
      std::vector<const TargetAnalysis*> parts;
      for (std::size_t i = 0; i < ctx.targets.size(); ++i) {
        if (ctx.targets[i].model_id == model) parts.push_back(&results[i]);
      }
      bundle.overlap.push_back(pooled_report(ctx, model, parts));
    }
  }
  return bundle;
}

fs::path cmd_analyze(const RunConfig& config, std::ostream& log) {
  validate_run_config(config, api_key_from_env(), Stage::analyze);
  const RunContext context = load_context(config);
  const ReportBundle bundle = analyze(context);
  fs::create_directories(config.output_dir);
  const fs::path path = config.output_dir / "bundle.json";
  write_file_atomic(path, serialize_bundle(bundle));
  log << "analyzed " << context.targets.size() << " target(s); bundle " << bundle.run_id << " written to "
      << path.generic_string() << "\n";
  return path;
}

std::vector<std::string> parse_formats(std::string_view list) {
  std::vector<std::string> formats;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    if (std::find(kKnownFormats.begin(), kKnownFormats.end(), current) == kKnownFormats.end()) {
      throw Error(ErrorKind::usage, "unknown format '" + current + "' (csv|md|json|svg)");
    }
    if (std::find(formats.begin(), formats.end(), current) == formats.end()) formats.push_back(current);
    current.clear();
  };
  for (char c : list) {
    if (c == ',') {
      flush();
    } else if (c != ' ') {
      current.push_back(c);
    }
  }
  flush();
  if (formats.empty()) throw Error(ErrorKind::usage, "no output formats given");
  return formats;
}

std::vector<fs::path> cmd_report(const fs::path& bundle_path, const std::vector<std::string>& formats,
                                 const fs::path& output_dir, std::ostream& listing) {
  for (const auto& format : formats) {
    if (std::find(kKnownFormats.begin(), kKnownFormats.end(), format) == kKnownFormats.end()) {
      throw Error(ErrorKind::usage, "unknown format '" + format + "' (csv|md|json|svg)");
    }
  }
  const ReportBundle bundle = parse_bundle(read_file(bundle_path));
  fs::create_directories(output_dir);

  auto has = [&](const char* format) { return std::find(formats.begin(), formats.end(), format) != formats.end(); };
  std::vector<fs::path> written;
  auto emit = [&](const fs::path& path, const std::string& content) {
    write_file_atomic(path, content);
    written.push_back(path);
    listing << path.generic_string() << "\n";
  };
  auto emit_table = [&](const std::string& stem, const Table& table) {
    if (has("csv")) emit(output_dir / (stem + ".csv"), to_csv(table));
    if (has("md")) emit(output_dir / (stem + ".md"), to_markdown(table));
    if (has("json")) emit(output_dir / (stem + ".json"), to_json(table).dump(2) + "\n");
  };

  emit_table("overlap", render_overlap_table(bundle));
  emit_table("crime", render_crime_table(bundle));
  for (const auto& semantic : bundle.semantic) {
    const std::string stem = "geo_" + target_slug(semantic.target);
    emit_table(stem, render_geo_chart_data(bundle, semantic));
    if (has("svg")) emit(output_dir / (stem + ".svg"), render_geo_svg(bundle, semantic));
  }
  return written;
}

}  // namespace saeprobe
