#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace saeprobe {

enum class Boundary { word_boundary, substring };

std::string_view to_string(Boundary boundary);
Boundary boundary_from_string(std::string_view name);

// Matching is always case-insensitive. Under word_boundary a keyword must
// be delimited by non-alphanumeric characters or the text edges, and a
// multi-word keyword matches its words in sequence across any run of
// punctuation or whitespace ("terror attack" matches "Terror-attack").
// Substring matching runs over the same normalized text without the
// delimiter requirement. unicode_fold additionally folds non-ASCII case and
// strips Latin diacritics ("São Paulo" matches "sao paulo").
struct MatchPolicy {
  Boundary boundary = Boundary::word_boundary;
  bool unicode_fold = true;

  bool operator==(const MatchPolicy&) const = default;
};

std::string describe(const MatchPolicy& policy);

// Aho-Corasick automaton over the normalized keyword forms. Immutable after
// construction and safe to share across threads.
class KeywordMatcher {
 public:
  KeywordMatcher(std::vector<std::string> keywords, MatchPolicy policy);

  // Occurrences of each keyword (indexed like keywords()). Overlapping
  // occurrences count separately, and a keyword contained in another
  // ("attack" inside "terror attack") counts as well.
  std::vector<std::uint32_t> count(std::string_view text) const;

  std::set<std::string> matched(std::string_view text) const;
  std::uint64_t total_occurrences(std::string_view text) const;
  bool any(std::string_view text) const;

  const std::vector<std::string>& keywords() const { return keywords_; }
  const MatchPolicy& policy() const { return policy_; }
  // Normalized pattern each keyword is searched as.
  const std::vector<std::string>& patterns() const { return patterns_; }

 private:
  template <typename OnMatch>
  void scan(std::string_view normalized, OnMatch&& on_match) const;

  std::vector<std::string> keywords_;
  std::vector<std::string> patterns_;
  MatchPolicy policy_;

  std::vector<std::array<std::int32_t, 256>> next_;
  std::vector<std::vector<std::uint32_t>> outputs_;  // keyword indices ending at a state
  std::vector<std::int32_t> output_link_;            // nearest proper suffix state with outputs
};

// The subset of `keywords` occurring in `text`.
std::set<std::string> match_keywords(std::string_view text, std::span<const std::string> keywords,
                                     const MatchPolicy& policy);

}  // namespace saeprobe
