// saeprobe: collect SAE activations for concept prompts, measure overlap, render reports.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "saeprobe/error.hpp"
#include "saeprobe/lexicon.hpp"
#include "saeprobe/live_source.hpp"
#include "saeprobe/pipeline.hpp"

namespace {

using namespace saeprobe;

struct RunFlags {
  std::string config;
  std::vector<std::string> targets;
  std::string lexicons;
  std::string registry;
  std::size_t k = 0;
  std::string intra_def;
  std::string backend;
  std::uint64_t seed = 0;
  std::string cache_dir;
  std::string out;
  std::string formats;
  double rate_limit = 0;
  std::string match_boundary;
  std::vector<std::string> religions;
  std::string synthetic_spec;
  std::string fixtures;
  std::size_t texts_per_feature = 0;
  bool pooled = false;
  bool no_unicode_fold = false;
};

void add_run_flags(CLI::App& cmd, RunFlags& f) {
  cmd.add_option("--config", f.config, "JSON config file; explicit flags override its values");
  cmd.add_option("--targets", f.targets, "SAE targets: all, <model>, or <model>/<source-set> (repeatable)")
      ->delimiter(',');
  cmd.add_option("--lexicons", f.lexicons, "lexicon JSON file");
  cmd.add_option("--registry", f.registry, "SAE target registry JSON file");
  cmd.add_option("--k", f.k, "top-k features kept per prompt (default 20)")->check(CLI::PositiveNumber);
  cmd.add_option("--intra-def", f.intra_def, "intra-group overlap definition (default multi)")
      ->check(CLI::IsMember({"multi", "pairwise", "intersect"}));
  cmd.add_option("--backend", f.backend, "activation backend (default synthetic)")
      ->check(CLI::IsMember({"live", "fixture", "synthetic"}));
  cmd.add_option("--seed", f.seed, "seed for the synthetic backend");
  cmd.add_option("--cache-dir", f.cache_dir, "activation cache directory (default cache)");
  cmd.add_option("--out", f.out, "output directory (default out)");
  cmd.add_option("--formats", f.formats, "comma list of csv,md,json,svg");
  cmd.add_option("--rate-limit", f.rate_limit, "live requests per second (default 1)")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--match-boundary", f.match_boundary, "keyword match boundary (default word)")
      ->check(CLI::IsMember({"word", "substring"}));
  cmd.add_option("--religions", f.religions, "religion lexicon ids or names (default all)")->delimiter(',');
  cmd.add_option("--synthetic-spec", f.synthetic_spec, "synthetic generator spec JSON");
  cmd.add_option("--fixtures", f.fixtures, "fixture directory for the fixture backend");
  cmd.add_option("--texts-per-feature", f.texts_per_feature, "top activating texts kept per feature");
  cmd.add_flag("--pooled", f.pooled, "also report overlap pooled across each model's SAEs");
  cmd.add_flag("--no-unicode-fold", f.no_unicode_fold, "match keywords without stripping diacritics");
}

RunConfig resolve_config(const CLI::App& cmd, const RunFlags& f) {
  RunConfig config = default_run_config();
  if (!f.config.empty()) config = load_config_file(std::move(config), f.config);
  auto given = [&](const char* name) { return cmd.count(name) > 0; };
  if (given("--targets")) config.targets = f.targets;
  if (given("--lexicons")) config.lexicon_path = f.lexicons;
  if (given("--registry")) config.registry_path = f.registry;
  if (given("--k")) config.k = f.k;
  if (given("--intra-def")) config.intra_definition = intra_definition_from_string(f.intra_def);
  if (given("--backend")) config.backend = backend_from_string(f.backend);
  if (given("--seed")) config.seed = f.seed;
  if (given("--cache-dir")) config.cache_dir = f.cache_dir;
  if (given("--out")) config.output_dir = f.out;
  if (given("--formats")) config.formats = parse_formats(f.formats);
  if (given("--rate-limit")) config.rate_limit_rps = f.rate_limit;
  if (given("--match-boundary")) config.match_policy.boundary = boundary_from_string(f.match_boundary);
  if (given("--religions")) config.religions = f.religions;
  if (given("--synthetic-spec")) config.synthetic_spec_path = f.synthetic_spec;
  if (given("--fixtures")) config.fixtures_dir = f.fixtures;
  if (given("--texts-per-feature")) config.texts_per_feature = f.texts_per_feature;
  if (given("--pooled")) config.pooled = true;
  if (given("--no-unicode-fold")) config.match_policy.unicode_fold = false;
  return config;
}

const char* kFooter = R"(Environment:
  NEURONPEDIA_API_KEY   API key for --backend live (sent as the x-api-key header)

Exit codes:
  0  success
  1  unexpected internal error
  2  usage error (bad flag, unknown format)
  3  transport or protocol error (live backend)
  4  missing data (cache gaps, missing files)
  5  schema or checksum error (corrupt cache entry or bundle)
  6  validation, configuration, template or undefined-metric error)";

int run(int argc, char** argv) {
  CLI::App app{"Audit SAE latent features for religion, violence and geography associations"};
  app.footer(kFooter);
  app.require_subcommand(1);

  RunFlags collect_flags;
  auto* collect = app.add_subcommand("collect", "fetch top-k activations for every target and prompt into the cache");
  add_run_flags(*collect, collect_flags);

  RunFlags analyze_flags;
  auto* analyze = app.add_subcommand("analyze", "compute overlap and semantic probes from the cache; writes bundle.json");
  add_run_flags(*analyze, analyze_flags);

  std::string bundle_path;
  std::string report_out = "out";
  std::string report_formats = "csv,md,json,svg";
  auto* report = app.add_subcommand("report", "render tables and charts from a bundle");
  report->add_option("--bundle", bundle_path, "bundle file (default <out>/bundle.json)");
  report->add_option("--out", report_out, "output directory (default out)");
  report->add_option("--formats", report_formats, "comma list of csv,md,json,svg");

  auto* lexicon = app.add_subcommand("lexicon", "lexicon utilities");
  lexicon->require_subcommand(1);
  std::string lexicon_path = default_run_config().lexicon_path.string();
  auto* validate = lexicon->add_subcommand("validate", "check a lexicon file and render its prompts");
  validate->add_option("path", lexicon_path, "lexicon JSON file (default: shipped lexicons)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code_for(ErrorKind::usage);
  }

  try {
    if (collect->parsed()) {
      const CollectResult result = cmd_collect(resolve_config(*collect, collect_flags), std::cout);
      if (!result.failures.empty()) {
        std::cerr << result.failures.size() << " of " << result.cells << " cells failed; see "
                  << result.manifest_path.generic_string() << "\n";
        return exit_code_for(result.failures.front().kind);
      }
    } else if (analyze->parsed()) {
      cmd_analyze(resolve_config(*analyze, analyze_flags), std::cout);
    } else if (report->parsed()) {
      const std::filesystem::path out = report_out;
      const std::filesystem::path bundle = bundle_path.empty() ? out / "bundle.json" : std::filesystem::path(bundle_path);
      cmd_report(bundle, parse_formats(report_formats), out, std::cout);
    } else if (validate->parsed()) {
      const auto lexicons = load_lexicons(lexicon_path);
      for (const auto& l : lexicons) {
        std::cout << l.category_id << " (" << to_string(l.kind) << "): " << l.terms.size() << " terms";
        if (l.kind == LexiconKind::religion || l.kind == LexiconKind::bias_probe) {
          std::cout << ", " << render_prompts(l).size() << " prompts";
        }
        std::cout << "\n";
      }
      std::cout << "ok\n";
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
