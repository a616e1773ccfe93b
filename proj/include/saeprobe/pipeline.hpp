#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "saeprobe/activation.hpp"
#include "saeprobe/error.hpp"
#include "saeprobe/keyword_matcher.hpp"
#include "saeprobe/lexicon.hpp"
#include "saeprobe/overlap.hpp"
#include "saeprobe/report.hpp"
#include "saeprobe/semantic.hpp"

namespace saeprobe {

enum class Backend { live, fixture, synthetic };
std::string_view to_string(Backend backend);
Backend backend_from_string(std::string_view name);

struct RunConfig {
  std::vector<std::string> targets = {"all"};  // selectors understood by TargetRegistry::select
  std::filesystem::path lexicon_path;
  std::filesystem::path registry_path;
  std::size_t k = 20;
  IntraDefinition intra_definition = IntraDefinition::multi_occurrence;
  MatchPolicy match_policy;
  ShareMode share_mode = ShareMode::texts_with_match;
  GeoCountMode geo_mode = GeoCountMode::occurrences;
  bool deduplicate = false;
  Backend backend = Backend::synthetic;
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path output_dir = "out";
  std::filesystem::path fixtures_dir;        // fixture backend input
  std::filesystem::path synthetic_spec_path;  // empty: built-in generator spec
  std::optional<std::uint64_t> seed;
  double rate_limit_rps = 1.0;
  std::vector<std::string> formats = {"csv", "md", "json", "svg"};
  std::optional<std::vector<std::string>> religions;  // unset: every religion lexicon
  bool pooled = false;
  std::optional<std::size_t> texts_per_feature;
};

// Defaults point at the data directory compiled into the build.
RunConfig default_run_config();

nlohmann::json to_json(const RunConfig& config);
// Keys absent from `doc` keep their value from `base`; unknown keys are rejected.
RunConfig apply_config_json(RunConfig base, const nlohmann::json& doc);
RunConfig load_config_file(RunConfig base, const std::filesystem::path& path);

enum class Stage { collect, analyze };
// Backend inputs (API key, fixtures, seed) are only checked for the collect stage.
void validate_run_config(const RunConfig& config, const std::optional<std::string>& api_key,
                         Stage stage = Stage::collect);
std::optional<std::string> api_key_from_env();

// Everything a run needs after the input files are loaded.
struct RunContext {
  RunConfig config;
  std::vector<ConceptLexicon> lexicons;
  TargetRegistry registry;
  std::vector<SaeTarget> targets;
  std::vector<ConceptLexicon> religions;
  ConceptLexicon bias;
  ConceptLexicon crime;
  std::vector<ConceptLexicon> regions;
};

RunContext load_context(const RunConfig& config);

// One (target, prompt) cell of the collection grid.
struct CollectionCell {
  SaeTarget target;
  Prompt prompt;
};
std::vector<CollectionCell> collection_grid(const RunContext& context);

std::shared_ptr<ActivationSource> make_source(const RunContext& context);

struct CollectFailure {
  CollectionCell cell;
  ErrorKind kind;
  std::string message;
};

struct CollectResult {
  std::size_t cells = 0;
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::vector<CollectFailure> failures;
  std::filesystem::path manifest_path;
};

// `inner` is wrapped in the on-disk cache under config.cache_dir.
CollectResult cmd_collect(const RunContext& context, std::shared_ptr<ActivationSource> inner, std::ostream& log);
CollectResult cmd_collect(const RunConfig& config, std::ostream& log);

ReportBundle analyze(const RunContext& context);
std::filesystem::path cmd_analyze(const RunConfig& config, std::ostream& log);

std::vector<std::string> parse_formats(std::string_view list);
std::vector<std::filesystem::path> cmd_report(const std::filesystem::path& bundle_path,
                                              const std::vector<std::string>& formats,
                                              const std::filesystem::path& output_dir, std::ostream& listing);

}  // namespace saeprobe
