// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "saeprobe/error.hpp"
#include "saeprobe/fixture_store.hpp"
#include "saeprobe/hashing.hpp"
#include "saeprobe/keyword_matcher.hpp"
#include "saeprobe/lexicon.hpp"
#include "saeprobe/overlap.hpp"
#include "saeprobe/pipeline.hpp"
#include "saeprobe/report.hpp"
#include "saeprobe/semantic.hpp"
#include "saeprobe/synthetic_source.hpp"
#include "published_fixture.hpp"
#include "test_helpers.hpp"

using namespace saeprobe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

// Frozen digest of every shipped term list (see lexicon_digest).
constexpr const char* kLexiconDigest = "a9265875562e5158819f62754b20672ebe9aff2048037e6e0eb5b6537f148378";

std::string lexicon_digest(const std::vector<ConceptLexicon>& lexicons) {
  std::string doc;
  for (const auto& lex : lexicons) {
    for (const auto& term : lex.terms) doc += lex.category_id + ":" + term + "\n";
  }
  return sha256_hex(doc);
}

// ---- 1 ----------------------------------------------------------------------

Outcome vai_regression() {
  int exact = 0;
  int cells = 0;
  std::int64_t worst = 0;
  std::string misses;
  for (const auto& column : oracle::published_overlap()) {
    std::map<std::string, std::uint64_t> raw;
    std::map<std::string, double> raw_d;
    for (int r = 0; r < 5; ++r) {
      raw[oracle::religion_ids()[r]] = static_cast<std::uint64_t>(column.inter[r]);
      raw_d[oracle::religion_ids()[r]] = column.inter[r];
    }
    const auto vai = violence_association_index(raw);
    const auto expected = oracle::vai(raw_d);
    for (int r = 0; r < 5; ++r) {
      const auto& id = oracle::religion_ids()[r];
      if (std::abs(vai.at(id) - expected.at(id)) > 1e-9) return {false, std::string(column.model) + " disagrees with the oracle"};
      const auto index = round_half_up(vai.at(id));
      const auto diff = std::abs(index - column.index[r]);
      worst = std::max(worst, diff);
      ++cells;
      if (diff == 0) {
        ++exact;
      } else {
        misses += std::string(" ") + column.model + "/" + id + "=" + std::to_string(index) + " vs " +
                  std::to_string(column.index[r]) + ";";
      }
    }
  }

  // end to end through fixture collection and analyze for every column whose counts are consistent
  const auto root = testing_support::scratch_dir("acceptance_published");
  RunConfig config = default_run_config();
  config.backend = Backend::fixture;
  config.cache_dir = root / "cache";
  config.output_dir = root / "out";
  config.targets.clear();
  const auto lexicons = load_lexicons(config.lexicon_path);
  const auto registry = TargetRegistry::load(config.registry_path);
  const auto religions = lexicons_of_kind(lexicons, LexiconKind::religion);
  const auto& bias = find_lexicon(lexicons, "bias");
  std::vector<const oracle::PublishedColumn*> built;
  std::string skipped;
  for (const auto& column : oracle::published_overlap()) {
    if (!published::constructible(column)) {
      skipped += std::string(" ") + column.model;
      continue;
    }
    published::build_column(config.cache_dir, column, registry.select(column.selector).front(), religions, bias);
    config.targets.push_back(column.selector);
    built.push_back(&column);
  }
  const ReportBundle bundle = analyze(load_context(config));
  for (std::size_t c = 0; c < built.size(); ++c) {
    const auto& column = *built[c];
    const auto& report = bundle.overlap.at(c);
    bool same = report.combined_unique == static_cast<std::uint64_t>(column.combined);
    for (int r = 0; r < 5; ++r) {
      const auto& id = oracle::religion_ids()[r];
      same = same && report.per_religion_intra.at(id) == column.intra[r] &&
             report.per_religion_inter.at(id) == static_cast<std::uint64_t>(column.inter[r]) &&
             std::abs(round_half_up(report.per_religion_vai.at(id)) - column.index[r]) <= 1;
    }
    if (!same) return {false, std::string("pipeline did not reproduce ") + column.model};
  }

  std::ostringstream detail;
  detail << exact << "/" << cells << " exact, max |diff| " << worst << ";" << misses << " pipeline reproduced "
         << built.size() << " columns, inconsistent:" << skipped;
  return {worst <= 1 && exact >= 23, detail.str()};
}

// ---- 2 ----------------------------------------------------------------------

Outcome vai_invariants() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> groups(1, 8);
  std::uniform_int_distribution<std::uint64_t> value(1, 1000000);
  std::uniform_int_distribution<std::uint64_t> scale(2, 1000);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    std::map<std::string, std::uint64_t> raw;
    const int n = groups(rng);
    for (int g = 0; g < n; ++g) raw["g" + std::to_string(g)] = value(rng);
    const auto vai = violence_association_index(raw);
    double mean = 0;
    for (const auto& [g, v] : vai) mean += v;
    mean /= static_cast<double>(vai.size());
    worst = std::max(worst, std::abs(mean - 100.0));
    const std::uint64_t c = scale(rng);
    auto scaled = raw;
    for (auto& [g, v] : scaled) v *= c;
    if (violence_association_index(scaled) != vai) return {false, "scaling changed the index at map " + std::to_string(i)};
  }
  return {worst <= 1e-9, fmt("1000 maps, max |mean-100| %.3g, scaling exact", worst)};
}

// ---- 3 ----------------------------------------------------------------------

Outcome set_metrics() {
  std::mt19937_64 rng(3);
  const SaeTarget target = testing_support::toy_target(2000);
  std::uniform_int_distribution<std::size_t> prompts(1, 50);
  std::uniform_int_distribution<std::uint32_t> universe_d(50, 2000);
  std::uniform_int_distribution<std::size_t> k_d(1, 200);
  for (int i = 0; i < 500; ++i) {
    const std::uint32_t universe = universe_d(rng);
    const std::size_t width = std::min<std::size_t>(200, universe);
    const std::size_t k = k_d(rng);
    auto group = [&] {
      std::vector<ActivationRecord> records(prompts(rng));
      for (auto& r : records) r = testing_support::random_record(rng, target, width, universe);
      return records;
    };
    const auto a = group();
    const auto b = group();
    const auto bias = group();
    const std::string at = "instance " + std::to_string(i) + ": ";

    if (intra_group_overlap(a, IntraDefinition::multi_occurrence, k) != oracle::multi_occurrence(a, k)) {
      return {false, at + "multi_occurrence"};
    }
    if (intra_group_overlap(a, IntraDefinition::global_intersection, k) != oracle::global_intersection(a, k)) {
      return {false, at + "global_intersection"};
    }
    const double pm = intra_group_overlap(a, IntraDefinition::pairwise_mean, k);
    const double pm_expected = oracle::pairwise_mean(a, k);
    if (std::abs(pm - pm_expected) > 1e-9 * std::max(1.0, pm_expected)) return {false, at + "pairwise_mean"};

    const FeatureSet ua = union_features(a, k);
    const FeatureSet ub = union_features(bias, k);
    const auto oa = oracle::union_of(a, k);
    const auto ob = oracle::union_of(bias, k);
    if (std::vector<FeatureKey>(oa.begin(), oa.end()) != ua.keys) return {false, at + "union"};

    std::vector<ActivationRecord> both = a;
    both.insert(both.end(), b.begin(), b.end());
    if (combined_unique(both, k) != oracle::union_of(both, k).size()) return {false, at + "combined"};
    if (inter_group_overlap(ua, ub) != oracle::intersection(oa, ob)) return {false, at + "inter"};
    if (std::abs(binary_cosine(ua, ub) - oracle::cosine(oa, ob)) > 1e-12) return {false, at + "cosine"};
  }
  return {true, "500 instances, intra x3, union, combined, inter, cosine agree"};
}

// ---- 4 ----------------------------------------------------------------------

// Random case, punctuation and diacritic noise around keyword fragments.
std::string noisy_text(std::mt19937_64& rng, const std::vector<std::string>& pool) {
  static const std::vector<std::string> glue = {" ", "  ", "-", ", ", ". ", "'", "\t", "/", "", "_", " (", ") "};
  static const std::vector<std::string> extra = {"São", "Zürich", "ÉGYPTE", "naïve", "İstanbul", "café", "straße",
                                                 "x", "123", "the", "an", "s"};
  std::uniform_int_distribution<int> len(1, 8);
  std::string text;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    std::string piece;
    const auto roll = rng() % 10;
    if (roll < 6) {
      piece = pool[rng() % pool.size()];
      if (rng() % 3 == 0 && piece.size() > 3) piece = piece.substr(0, piece.size() - 1 - rng() % 2);
    } else {
      piece = extra[rng() % extra.size()];
    }
    for (auto& ch : piece) {
      if (rng() % 4 == 0 && ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
      if (ch == ' ' && rng() % 3 == 0) ch = '-';
    }
    text += piece;
    text += glue[rng() % glue.size()];
  }
  return text;
}

Outcome keyword_matcher_equivalence() {
  const auto lexicons = load_lexicons(default_run_config().lexicon_path);
  std::vector<std::string> pool;
  std::vector<KeywordInjection> injections;
  for (const auto& lex : lexicons) {
    pool.insert(pool.end(), lex.terms.begin(), lex.terms.end());
    if (lex.kind == LexiconKind::crime_index || lex.kind == LexiconKind::geo_region) {
      injections.push_back({lex.category_id, lex.terms, 0.3});
    }
  }
  std::vector<std::string> texts = synthetic_corpus(50000, injections, 4);
  std::mt19937_64 rng(4);
  while (texts.size() < 100000) texts.push_back(noisy_text(rng, pool));

  std::uint64_t occurrences = 0;
  for (const Boundary boundary : {Boundary::word_boundary, Boundary::substring}) {
    const MatchPolicy policy{boundary, true};
    for (const auto& lex : lexicons) {
      const KeywordMatcher matcher(lex.terms, policy);
      const oracle::NaiveScanner naive(lex.terms, policy);
      for (std::size_t t = 0; t < texts.size(); ++t) {
        const auto got = matcher.count(texts[t]);
        if (got != naive.counts(texts[t])) {
          return {false, "mismatch for " + lex.category_id + " (" + std::string(to_string(boundary)) + ") on: " + texts[t]};
        }
        for (auto c : got) occurrences += c;
      }
    }
  }
  std::ostringstream detail;
  detail << texts.size() << " texts x " << lexicons.size() << " lists x 2 policies, " << occurrences
         << " occurrences agree";
  return {true, detail.str()};
}

// ---- 5 ----------------------------------------------------------------------

SyntheticSpec planted_spec(const std::vector<ConceptLexicon>& lexicons) {
  SyntheticSpec spec;
  spec.pools.push_back({"shared_violence", 40, {}});
  for (const auto& lex : lexicons) {
    if (lex.kind == LexiconKind::religion) {
      spec.pools.push_back({lex.category_id + "_private", 60, {}});
      spec.memberships.push_back({lex.category_id, lex.category_id + "_private", 1.0, 0.25});
      spec.memberships.push_back({lex.category_id, "shared_violence", lex.category_id == "islam" ? 0.6 : 0.2, 0.5});
    } else if (lex.kind == LexiconKind::bias_probe) {
      spec.pools.push_back({lex.category_id + "_private", 30, {}});
      spec.memberships.push_back({lex.category_id, lex.category_id + "_private", 1.0, 0.5});
      spec.memberships.push_back({lex.category_id, "shared_violence", 1.0, 0.5});
    }
  }
  return spec;
}

Outcome synthetic_recovery() {
  const RunConfig config = default_run_config();
  const auto lexicons = load_lexicons(config.lexicon_path);
  const auto registry = TargetRegistry::load(config.registry_path);
  const SaeTarget target = registry.select("gemma-2-2b/gemmascope-res-16k").front();
  const auto religions = lexicons_of_kind(lexicons, LexiconKind::religion);
  const auto& bias = find_lexicon(lexicons, "bias");
  int recovered = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SyntheticSource source(planted_spec(lexicons), seed, registry);
    std::vector<ReligionRecords> groups;
    for (const auto& lex : religions) {
      ReligionRecords group{lex.category_id, {}};
      for (const auto& prompt : render_prompts(lex)) group.records.push_back(source.fetch_top_features(target, prompt, 20));
      groups.push_back(std::move(group));
    }
    std::vector<ActivationRecord> bias_records;
    for (const auto& prompt : render_prompts(bias)) bias_records.push_back(source.fetch_top_features(target, prompt, 20));
    const auto report = compute_overlap_report(target, groups, bias_records, IntraDefinition::multi_occurrence, 20);
    if (report.per_religion_vai.empty()) continue;
    const double islam = report.per_religion_vai.at("islam");
    bool strict = true;
    for (const auto& [id, v] : report.per_religion_vai) strict = strict && (id == "islam" || v < islam);
    if (strict) ++recovered;
  }
  return {recovered >= 18, std::to_string(recovered) + "/20 seeds put Islam strictly first"};
}

// ---- 6 ----------------------------------------------------------------------

Outcome crime_share_accuracy() {
  const auto lexicons = load_lexicons(default_run_config().lexicon_path);
  const auto& crime = find_lexicon(lexicons, "crime");
  const SaeTarget target = testing_support::toy_target();
  double worst = 0;
  std::string worst_at;
  for (const double rate : {0.02, 0.0346, 0.07}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const std::vector<KeywordInjection> injections = {{"crime", crime.terms, rate}};
      const TextCorpus corpus{target, "islam", synthetic_corpus(20000, injections, seed)};
      const CrimeShare share = crime_share(corpus, crime, MatchPolicy{});
      const double err = std::abs(share.crime_share_percent - 100.0 * rate);
      if (err > worst) {
        worst = err;
        worst_at = fmt("r=%.4g seed=%.0f measured %.3f%%", rate, static_cast<double>(seed), share.crime_share_percent);
      }
    }
  }
  return {worst <= 0.4, fmt("30 runs at N=20000, max error %.3f pp", worst) + " (" + worst_at + ")"};
}

// ---- 7 ----------------------------------------------------------------------

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) out[fs::relative(entry.path(), root).string()] = read_file(entry.path());
  }
  return out;
}

// Relative paths so both runs record the same configuration.
void full_run(const fs::path& root, std::uint64_t seed) {
  const fs::path previous = fs::current_path();
  fs::current_path(root);
  try {
    RunConfig config = default_run_config();
    config.seed = seed;
    config.cache_dir = "cache";
    config.output_dir = "out";
    std::ostringstream log;
    validate_run_config(config, std::nullopt);
    cmd_collect(config, log);
    const fs::path bundle = cmd_analyze(config, log);
    cmd_report(bundle, config.formats, config.output_dir, log);
  } catch (...) {
    fs::current_path(previous);
    throw;
  }
  fs::current_path(previous);
}

Outcome determinism() {
  const auto a = testing_support::scratch_dir("acceptance_run_a");
  const auto b = testing_support::scratch_dir("acceptance_run_b");
  full_run(a, 42);
  full_run(b, 42);
  const auto bytes_a = tree_bytes(a);
  const auto bytes_b = tree_bytes(b);
  std::size_t svg = 0;
  for (const auto& [name, content] : bytes_a) {
    if (name.size() > 4 && name.substr(name.size() - 4) == ".svg") ++svg;
  }
  if (bytes_a.size() != bytes_b.size()) return {false, "file sets differ"};
  for (const auto& [name, content] : bytes_a) {
    const auto it = bytes_b.find(name);
    if (it == bytes_b.end() || it->second != content) return {false, "differs: " + name};
  }
  std::ostringstream detail;
  detail << bytes_a.size() << " files identical across two seed-42 runs (" << svg << " svg)";
  return {svg > 0, detail.str()};
}

// ---- 8 ----------------------------------------------------------------------

Outcome lexicon_fidelity() {
  const auto lexicons = load_lexicons(default_run_config().lexicon_path);
  const std::vector<std::pair<std::string, std::size_t>> sizes = {
      {"christianity", 13}, {"islam", 13}, {"judaism", 12}, {"buddhism", 13}, {"hinduism", 13}, {"bias", 12}};
  for (const auto& [id, n] : sizes) {
    const auto& lex = find_lexicon(lexicons, id);
    if (lex.terms.size() != n) return {false, id + " has " + std::to_string(lex.terms.size()) + " terms"};
  }
  const std::vector<std::string> regions = {"europe",        "asia",          "middle_east", "africa",
                                            "north_america", "south_america", "australia"};
  const auto geo = lexicons_of_kind(lexicons, LexiconKind::geo_region);
  if (geo.size() != regions.size()) return {false, "expected 7 region lists"};
  for (const auto& id : regions) {
    if (find_lexicon(lexicons, id).kind != LexiconKind::geo_region) return {false, id + " is not a region list"};
  }
  const std::string digest = lexicon_digest(lexicons);
  return {digest == kLexiconDigest, "13/13/12/13/13 + 12 terms, 7 regions, digest " + digest.substr(0, 16)};
}

// ---- 9 ----------------------------------------------------------------------

Outcome geo_normalization() {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::uint64_t> count(0, 5000);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    std::map<std::string, std::uint64_t> counts;
    for (int r = 0; r < 7; ++r) counts["r" + std::to_string(r)] = rng() % 4 == 0 ? 0 : count(rng);
    if (counts.begin()->second == 0) counts.begin()->second = 1;
    const GeoShares shares = geo_shares(counts);
    double sum = 0;
    for (const auto& [r, p] : shares.percent) sum += p;
    worst = std::max(worst, std::abs(sum - 100.0));
  }

  const auto root = testing_support::scratch_dir("acceptance_geo");
  RunConfig config = default_run_config();
  config.seed = 9;
  config.targets = {"gpt2-small/res-jb"};
  config.cache_dir = root / "cache";
  config.output_dir = root / "out";
  std::ostringstream log;
  cmd_collect(config, log);
  const ReportBundle bundle = parse_bundle(read_file(cmd_analyze(config, log)));
  std::size_t rows = 0;
  for (const auto& table : bundle.semantic) {
    rows = render_geo_chart_data(bundle, table).rows.size();
    for (const auto& [religion, by_region] : table.geo) {
      const GeoShares shares = geo_shares(by_region);
      if (shares.all_zero) continue;
      double sum = 0;
      for (const auto& [r, p] : shares.percent) sum += p;
      worst = std::max(worst, std::abs(sum - 100.0));
    }
  }
  return {worst <= 1e-9 && rows == 35, fmt("max |sum-100| %.3g, chart rows %.0f", worst, static_cast<double>(rows))};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
  double limit_seconds;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "violence association index regression", vai_regression, 1},
      {2, "index mean and scale invariance", vai_invariants, 5},
      {3, "set metrics match brute force", set_metrics, 30},
      {4, "keyword matcher matches naive scan", keyword_matcher_equivalence, 60},
      {5, "planted association recovered", synthetic_recovery, 60},
      {6, "crime share accuracy", crime_share_accuracy, 30},
      {7, "synthetic pipeline is byte-reproducible", determinism, 60},
      {8, "lexicon fidelity", lexicon_fidelity, 1},
      {9, "geo shares normalized", geo_normalization, 5},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds > c.limit_seconds) {
      outcome.pass = false;
      outcome.detail += fmt("; over the %.0f s limit", c.limit_seconds);
    }
    std::printf("%s [%d] %s: %s (%.2f s)\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name, outcome.detail.c_str(),
                seconds);
    std::fflush(stdout);
    if (!outcome.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
