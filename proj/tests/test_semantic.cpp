#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "saeprobe/error.hpp"
#include "saeprobe/semantic.hpp"
#include "saeprobe/synthetic_source.hpp"
#include "test_helpers.hpp"

using namespace saeprobe;
using testing_support::toy_target;

namespace {

const std::vector<ConceptLexicon>& shipped() {
  static const auto lexicons = load_lexicons(default_run_config().lexicon_path);
  return lexicons;
}

TextCorpus corpus_of(std::vector<std::string> texts) { return {toy_target(), "islam", std::move(texts)}; }

}  // namespace

TEST_CASE("three of a hundred texts") {
  std::vector<std::string> texts(100, "a quiet afternoon");
  texts[5] = "a bomb went off";
  texts[50] = "the shooting and the crime";
  texts[99] = "terrorism";
  const CrimeShare share = crime_share(corpus_of(texts), find_lexicon(shipped(), "crime"), MatchPolicy{});
  CHECK(share.text_count == 100);
  CHECK(share.crime_text_count == 3);
  CHECK(share.crime_match_count == 4);
  CHECK(share.crime_share_percent == doctest::Approx(3.0));
  CHECK_FALSE(share.empty_corpus);

  const CrimeShare per_text = crime_share(corpus_of(texts), find_lexicon(shipped(), "crime"), MatchPolicy{},
                                          ShareMode::matches_per_text);
  CHECK(per_text.crime_share_percent == doctest::Approx(4.0));
}

TEST_CASE("empty corpus") {
  const CrimeShare share = crime_share(corpus_of({}), find_lexicon(shipped(), "crime"), MatchPolicy{});
  CHECK(share.crime_share_percent == 0.0);
  CHECK(share.empty_corpus);
  const auto geo = geo_mentions(corpus_of({}), lexicons_of_kind(shipped(), LexiconKind::geo_region), MatchPolicy{});
  CHECK(geo.size() == 7);
  for (const auto& [region, count] : geo) CHECK(count == 0);
}

TEST_CASE("crime share needs the crime lexicon") {
  try {
    crime_share(corpus_of({"x"}), find_lexicon(shipped(), "europe"), MatchPolicy{});
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
  }
}

TEST_CASE("geo mentions count occurrences") {
  const ConceptLexicon europe{"europe", "Europe", LexiconKind::geo_region, {"paris", "france", "berlin"}, {}, ""};
  const std::vector<ConceptLexicon> regions = {europe};
  const auto counts = geo_mentions(corpus_of({"Paris is in France", "Berlin"}), regions, MatchPolicy{});
  CHECK(counts.at("europe") == 3);
  const auto distinct = geo_mentions(corpus_of({"Paris is in France", "Berlin"}), regions, MatchPolicy{},
                                     GeoCountMode::distinct_texts);
  CHECK(distinct.at("europe") == 2);
}

TEST_CASE("a keyword listed by two regions counts for both") {
  const ConceptLexicon a{"a", "A", LexiconKind::geo_region, {"jerusalem"}, {}, ""};
  const ConceptLexicon b{"b", "B", LexiconKind::geo_region, {"jerusalem", "cairo"}, {}, ""};
  const std::vector<ConceptLexicon> regions = {a, b};
  const auto counts = geo_mentions(corpus_of({"Jerusalem and Cairo"}), regions, MatchPolicy{});
  CHECK(counts.at("a") == 1);
  CHECK(counts.at("b") == 2);
}

TEST_CASE("geo shares") {
  const auto shares = geo_shares({{"A", 1}, {"B", 3}});
  CHECK(shares.percent.at("A") == doctest::Approx(25.0));
  CHECK(shares.percent.at("B") == doctest::Approx(75.0));
  CHECK(geo_shares({{"A", 0}, {"B", 9}}).percent.at("B") == 100.0);
  const auto zero = geo_shares({{"A", 0}, {"B", 0}});
  CHECK(zero.all_zero);
  CHECK(zero.percent.at("A") == 0.0);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, std::uint64_t> counts;
    for (int r = 0; r < 7; ++r) counts["r" + std::to_string(r)] = rng() % 1000;
    counts["r0"] += 1;
    double sum = 0;
    for (const auto& [r, p] : geo_shares(counts).percent) sum += p;
    CHECK(std::abs(sum - 100.0) <= 1e-9);
  }
}

TEST_CASE("geo mentions agree with a naive scan; substring dominates word") {
  const auto regions = lexicons_of_kind(shipped(), LexiconKind::geo_region);
  std::vector<KeywordInjection> injections;
  for (const auto& r : regions) injections.push_back({r.category_id, r.terms, 0.2});
  const auto texts = synthetic_corpus(400, injections, 31);
  const TextCorpus corpus = corpus_of(texts);
  for (const MatchPolicy policy : {MatchPolicy{Boundary::word_boundary, true}, MatchPolicy{Boundary::substring, true}}) {
    const auto counts = geo_mentions(corpus, regions, policy);
    for (const auto& region : regions) {
      std::uint64_t expected = 0;
      for (const auto& text : texts) {
        for (auto c : oracle::keyword_counts(text, region.terms, policy)) expected += c;
      }
      CHECK(counts.at(region.category_id) == expected);
    }
  }
  const auto word = geo_mentions(corpus, regions, {Boundary::word_boundary, true});
  const auto sub = geo_mentions(corpus, regions, {Boundary::substring, true});
  for (const auto& [region, count] : word) CHECK(sub.at(region) >= count);
}

TEST_CASE("crime share ignores text order") {
  const auto& crime = find_lexicon(shipped(), "crime");
  auto texts = synthetic_corpus(500, std::vector<KeywordInjection>{{"crime", crime.terms, 0.1}}, 3);
  const CrimeShare before = crime_share(corpus_of(texts), crime, MatchPolicy{});
  std::mt19937_64 rng(1);
  std::shuffle(texts.begin(), texts.end(), rng);
  CHECK(crime_share(corpus_of(texts), crime, MatchPolicy{}) == before);
}

TEST_CASE("binomial corpus near 3.46 percent") {
  const auto& crime = find_lexicon(shipped(), "crime");
  const auto texts = synthetic_corpus(20575, std::vector<KeywordInjection>{{"crime", crime.terms, 0.0346}}, 2024);
  std::size_t expected = 0;
  for (const auto& text : texts) expected += oracle::matched(text, crime.terms, MatchPolicy{}).empty() ? 0 : 1;
  const CrimeShare share = crime_share(corpus_of(texts), crime, MatchPolicy{});
  CHECK(share.crime_text_count == expected);
  CHECK(std::abs(share.crime_share_percent - 3.46) <= 0.4);
}

TEST_CASE("corpus deduplication") {
  const TextCorpus corpus = corpus_of({"a", "b", "a"});
  CHECK(corpus.unique_text_count() == 2);
  CHECK(corpus.deduplicated().texts == std::vector<std::string>{"a", "b"});
}
