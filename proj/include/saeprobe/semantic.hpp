#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "saeprobe/activation.hpp"
#include "saeprobe/keyword_matcher.hpp"
#include "saeprobe/lexicon.hpp"

namespace saeprobe {

// Every activation text of every top-k feature of every prompt of one
// religion, repetitions included.
struct TextCorpus {
  SaeTarget target;
  std::string religion;
  std::vector<std::string> texts;

  std::size_t unique_text_count() const;
  // Copy with repeated texts removed, first occurrence kept.
  TextCorpus deduplicated() const;
};

TextCorpus build_corpus(const SaeTarget& target, const std::string& religion,
                        std::span<const ActivationRecord> records, std::size_t k);

enum class ShareMode {
  texts_with_match,  // share of texts holding at least one keyword
  matches_per_text,  // keyword occurrences per 100 texts; may exceed 100
};

std::string_view to_string(ShareMode mode);

struct CrimeShare {
  std::uint64_t text_count = 0;
  std::uint64_t unique_text_count = 0;
  std::uint64_t crime_text_count = 0;
  std::uint64_t crime_match_count = 0;
  double crime_share_percent = 0.0;
  ShareMode mode = ShareMode::texts_with_match;
  bool empty_corpus = false;

  bool operator==(const CrimeShare&) const = default;
};

// Throws Error{validation} unless the lexicon is a crime_index lexicon.
CrimeShare crime_share(const TextCorpus& corpus, const ConceptLexicon& crime_lexicon, const MatchPolicy& policy,
                       ShareMode mode = ShareMode::texts_with_match);
CrimeShare crime_share(const TextCorpus& corpus, const KeywordMatcher& crime_matcher,
                       ShareMode mode = ShareMode::texts_with_match);

enum class GeoCountMode {
  occurrences,     // every keyword occurrence counts
  distinct_texts,  // texts mentioning the region at least once
};

std::string_view to_string(GeoCountMode mode);

// Region id -> mention count. Keywords shared between regions count for
// each region that lists them. Throws Error{validation} for lexicons that
// are not geo_region.
std::map<std::string, std::uint64_t> geo_mentions(const TextCorpus& corpus,
                                                  std::span<const ConceptLexicon> region_lexicons,
                                                  const MatchPolicy& policy,
                                                  GeoCountMode mode = GeoCountMode::occurrences);

struct GeoShares {
  std::map<std::string, double> percent;
  bool all_zero = false;
};

// Each count as a percentage of the total; all zeros when the total is 0.
GeoShares geo_shares(const std::map<std::string, std::uint64_t>& counts);

// Crime shares and the religion x region matrix for one target.
struct SemanticTable {
  SaeTarget target;
  std::vector<std::string> religions;
  std::vector<std::string> regions;
  std::map<std::string, CrimeShare> crime;                              // religion ->
  std::map<std::string, std::map<std::string, std::uint64_t>> geo;      // religion -> region ->
  MatchPolicy policy;
  GeoCountMode geo_mode = GeoCountMode::occurrences;
  bool deduplicated = false;

  bool operator==(const SemanticTable&) const = default;
};

struct SemanticOptions {
  MatchPolicy policy;
  ShareMode share_mode = ShareMode::texts_with_match;
  GeoCountMode geo_mode = GeoCountMode::occurrences;
  bool deduplicate = false;
};

SemanticTable compute_semantic_table(const SaeTarget& target, std::span<const TextCorpus> corpora,
                                     const ConceptLexicon& crime_lexicon,
                                     std::span<const ConceptLexicon> region_lexicons,
                                     const SemanticOptions& options);

}  // namespace saeprobe
