#include "saeprobe/semantic.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "saeprobe/error.hpp"

namespace saeprobe {

std::size_t TextCorpus::unique_text_count() const {
  return std::unordered_set<std::string_view>(texts.begin(), texts.end()).size();
}

TextCorpus TextCorpus::deduplicated() const {
  TextCorpus out{target, religion, {}};
  std::unordered_set<std::string_view> seen;
  for (const auto& text : texts) {
    if (seen.insert(text).second) out.texts.push_back(text);
  }
  return out;
}

TextCorpus build_corpus(const SaeTarget& target, const std::string& religion,
                        std::span<const ActivationRecord> records, std::size_t k) {
  TextCorpus corpus{target, religion, {}};
  for (const auto& record : records) {
    const std::size_t n = std::min(k, record.features.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& texts = record.features[i].top_texts;
      corpus.texts.insert(corpus.texts.end(), texts.begin(), texts.end());
    }
  }
  return corpus;
}

std::string_view to_string(ShareMode mode) {
  return mode == ShareMode::texts_with_match ? "texts_with_match" : "matches_per_text";
}

std::string_view to_string(GeoCountMode mode) {
  return mode == GeoCountMode::occurrences ? "occurrences" : "distinct_texts";
}

CrimeShare crime_share(const TextCorpus& corpus, const KeywordMatcher& crime_matcher, ShareMode mode) {
  CrimeShare share;
  share.mode = mode;
  share.text_count = corpus.texts.size();
  share.unique_text_count = corpus.unique_text_count();
  for (const auto& text : corpus.texts) {
    const std::uint64_t hits = crime_matcher.total_occurrences(text);
    share.crime_match_count += hits;
    if (hits > 0) ++share.crime_text_count;
  }
  if (share.text_count == 0) {
    share.empty_corpus = true;
    return share;
  }
  const double numerator = mode == ShareMode::texts_with_match ? static_cast<double>(share.crime_text_count)
                                                               : static_cast<double>(share.crime_match_count);
  share.crime_share_percent = numerator / static_cast<double>(share.text_count) * 100.0;
  return share;
}

CrimeShare crime_share(const TextCorpus& corpus, const ConceptLexicon& crime_lexicon, const MatchPolicy& policy,
                       ShareMode mode) {
  if (crime_lexicon.kind != LexiconKind::crime_index) {
    throw Error(ErrorKind::validation, "lexicon '" + crime_lexicon.category_id + "' is not a crime index");
  }
  return crime_share(corpus, KeywordMatcher(crime_lexicon.terms, policy), mode);
}

namespace {

// One matcher over the union of region keywords; each keyword remembers
// every region listing it.
struct RegionMatcher {
  KeywordMatcher matcher;
  std::vector<std::vector<std::size_t>> regions_of;  // keyword index -> region indices
};

RegionMatcher build_region_matcher(std::span<const ConceptLexicon> regions, const MatchPolicy& policy) {
  std::vector<std::string> keywords;
  std::vector<std::vector<std::size_t>> owners;
  std::map<std::string, std::size_t> position;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    if (regions[r].kind != LexiconKind::geo_region) {
      throw Error(ErrorKind::validation, "lexicon '" + regions[r].category_id + "' is not a geographic region");
    }
    for (const auto& term : regions[r].terms) {
      auto [it, inserted] = position.try_emplace(term, keywords.size());
      if (inserted) {
        keywords.push_back(term);
        owners.emplace_back();
      }
      owners[it->second].push_back(r);
    }
  }
  return {KeywordMatcher(std::move(keywords), policy), std::move(owners)};
}

}  // namespace

std::map<std::string, std::uint64_t> geo_mentions(const TextCorpus& corpus,
                                                  std::span<const ConceptLexicon> region_lexicons,
                                                  const MatchPolicy& policy, GeoCountMode mode) {
  const RegionMatcher rm = build_region_matcher(region_lexicons, policy);
  std::vector<std::uint64_t> totals(region_lexicons.size(), 0);
  std::vector<std::uint64_t> per_text(region_lexicons.size(), 0);
  for (const auto& text : corpus.texts) {
    std::fill(per_text.begin(), per_text.end(), 0);
    const std::vector<std::uint32_t> counts = rm.matcher.count(text);
    for (std::size_t kw = 0; kw < counts.size(); ++kw) {
      if (counts[kw] == 0) continue;
      for (std::size_t r : rm.regions_of[kw]) per_text[r] += counts[kw];
    }
    for (std::size_t r = 0; r < totals.size(); ++r) {
      totals[r] += mode == GeoCountMode::occurrences ? per_text[r] : (per_text[r] > 0 ? 1 : 0);
    }
  }
  std::map<std::string, std::uint64_t> out;
  for (std::size_t r = 0; r < region_lexicons.size(); ++r) out[region_lexicons[r].category_id] = totals[r];
  return out;
}

GeoShares geo_shares(const std::map<std::string, std::uint64_t>& counts) {
  GeoShares shares;
  const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0},
                                              [](std::uint64_t acc, const auto& kv) { return acc + kv.second; });
  shares.all_zero = total == 0;
  for (const auto& [region, count] : counts) {
    shares.percent[region] =
        total == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(total) * 100.0;
  }
  return shares;
}

SemanticTable compute_semantic_table(const SaeTarget& target, std::span<const TextCorpus> corpora,
                                     const ConceptLexicon& crime_lexicon,
                                     std::span<const ConceptLexicon> region_lexicons,
                                     const SemanticOptions& options) {
  if (crime_lexicon.kind != LexiconKind::crime_index) {
    throw Error(ErrorKind::validation, "lexicon '" + crime_lexicon.category_id + "' is not a crime index");
  }
  SemanticTable table;
  table.target = target;
  table.policy = options.policy;
  table.geo_mode = options.geo_mode;
  table.deduplicated = options.deduplicate;
  for (const auto& region : region_lexicons) table.regions.push_back(region.category_id);

  const KeywordMatcher crime_matcher(crime_lexicon.terms, options.policy);
  for (const auto& raw : corpora) {
    const TextCorpus corpus = options.deduplicate ? raw.deduplicated() : raw;
    table.religions.push_back(corpus.religion);
    CrimeShare share = crime_share(corpus, crime_matcher, options.share_mode);
    // Pooled and unique totals are both reported whatever the mode.
    share.unique_text_count = raw.unique_text_count();
    table.crime[corpus.religion] = share;
    table.geo[corpus.religion] = geo_mentions(corpus, region_lexicons, options.policy, options.geo_mode);
  }
  return table;
}

}  // namespace saeprobe
