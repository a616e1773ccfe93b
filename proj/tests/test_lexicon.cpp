#include <doctest.h>

#include <algorithm>

#include "saeprobe/error.hpp"
#include "saeprobe/lexicon.hpp"
#include "test_helpers.hpp"

using namespace saeprobe;

namespace {

const std::vector<ConceptLexicon>& shipped() {
  static const auto lexicons = load_lexicons(default_run_config().lexicon_path);
  return lexicons;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::usage;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

TEST_CASE("shipped Islam lexicon") {
  const auto& islam = find_lexicon(shipped(), "Islam");
  CHECK(islam.terms.size() == 13);
  CHECK(contains(islam.terms, "burka"));
  CHECK(contains(islam.terms, "hijab"));
  CHECK(contains(islam.terms, "mecca"));
}

TEST_CASE("shipped crime lexicon ends with shooting, bomb") {
  const auto& crime = find_lexicon(shipped(), "Crime");
  REQUIRE(crime.terms.size() == 12);
  CHECK(crime.kind == LexiconKind::crime_index);
  CHECK(crime.terms[0] == "terrorism");
  CHECK(crime.terms[10] == "shooting");
  CHECK(crime.terms[11] == "bomb");
}

TEST_CASE("shipped lexicon counts") {
  CHECK(lexicons_of_kind(shipped(), LexiconKind::religion).size() == 5);
  CHECK(lexicons_of_kind(shipped(), LexiconKind::geo_region).size() == 7);
  CHECK(find_lexicon(shipped(), "judaism").terms.size() == 12);
  CHECK(find_lexicon(shipped(), "violence").terms.size() == 12);
}

TEST_CASE("duplicate category ids conflict") {
  const char* doc = R"({"lexicons": [
    {"category_id": "A", "display_name": "A", "kind": "religion", "terms": ["x"]},
    {"category_id": "A", "display_name": "A2", "kind": "religion", "terms": ["y"]}]})";
  CHECK(kind_of([&] { parse_lexicons(doc); }) == ErrorKind::conflict);
}

TEST_CASE("parse failures are schema errors with position") {
  try {
    parse_lexicons("{\"lexicons\": [\n  {oops}\n]}");
    FAIL("expected schema error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::schema);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(kind_of([] { parse_lexicons(R"({"other": []})"); }) == ErrorKind::schema);
}

TEST_CASE("lexicon validation") {
  CHECK(kind_of([] {
          parse_lexicons(R"({"lexicons": [{"category_id": "a", "display_name": "A", "kind": "religion", "terms": []}]})");
        }) == ErrorKind::validation);
  // parsing lowercases, direct construction does not
  CHECK(parse_lexicons(
            R"({"lexicons": [{"category_id": "a", "display_name": "A", "kind": "religion", "terms": ["Church"]}]})")
            .front()
            .terms == std::vector<std::string>{"church"});
  CHECK(kind_of([] { validate_lexicon({"a", "A", LexiconKind::religion, {"Church"}, {}, ""}); }) ==
        ErrorKind::validation);
  CHECK(kind_of([] {
          parse_lexicons(
              R"({"lexicons": [{"category_id": "a", "display_name": "A", "kind": "religion", "terms": ["x", "x"]}]})");
        }) == ErrorKind::validation);
  CHECK(kind_of([] {
          parse_lexicons(R"({"lexicons": [{"category_id": "a", "display_name": "A", "kind": "religion",
                             "terms": ["x"], "template_overrides": {"y": "This is y."}}]})");
        }) == ErrorKind::validation);
  CHECK(kind_of([] {
          parse_lexicons(R"({"lexicons": [{"category_id": "a", "display_name": "A", "kind": "religion",
                             "terms": ["x"], "template_overrides": {"x": "This is x. And more."}}]})");
        }) == ErrorKind::validation);
}

TEST_CASE("render_prompts examples") {
  const auto& christianity = find_lexicon(shipped(), "christianity");
  const auto prompts = render_prompts(christianity);
  auto church = std::find_if(prompts.begin(), prompts.end(), [](const Prompt& p) { return p.term == "church"; });
  REQUIRE(church != prompts.end());
  CHECK(church->text == "This is a church.");

  const auto islam = render_prompts(find_lexicon(shipped(), "islam"));
  auto quran = std::find_if(islam.begin(), islam.end(), [](const Prompt& p) { return p.term == "quran"; });
  REQUIRE(quran != islam.end());
  CHECK(quran->text == "This is the Quran.");

  ConceptLexicon empty{"e", "E", LexiconKind::religion, {}, {}, ""};
  CHECK(render_prompts(empty).empty());
}

TEST_CASE("template errors") {
  ConceptLexicon lex{"a", "A", LexiconKind::religion, {"x"}, {}, ""};
  CHECK(kind_of([&] { render_prompts(lex, "No placeholder."); }) == ErrorKind::template_syntax);
  CHECK(kind_of([&] { render_prompts(lex, "{term} and {term}."); }) == ErrorKind::template_syntax);
  CHECK(kind_of([&] { render_prompts(lex, "This is a {term}"); }) == ErrorKind::template_syntax);
  CHECK(render_prompts(lex, "Consider {term}.").front().text == "Consider x.");
}

TEST_CASE("prompt properties hold for every prompted lexicon") {
  for (const auto& lex : shipped()) {
    if (lex.kind != LexiconKind::religion && lex.kind != LexiconKind::bias_probe) continue;
    const auto prompts = render_prompts(lex);
    CHECK(prompts.size() == lex.terms.size());
    CHECK(prompts == render_prompts(lex));
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      CHECK(prompts[i].term == lex.terms[i]);
      CHECK(prompts[i].category_id == lex.category_id);
      CHECK(is_valid_prompt_text(prompts[i].text, prompts[i].term));
    }
  }
}

TEST_CASE("serialize then parse is identity") {
  const std::string text = serialize_lexicons(shipped());
  CHECK(parse_lexicons(text) == shipped());
}

TEST_CASE("find_lexicon misses are not_found") {
  CHECK(kind_of([] { find_lexicon(shipped(), "sikhism"); }) == ErrorKind::not_found);
}
