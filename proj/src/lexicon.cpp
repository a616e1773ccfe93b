#include "saeprobe/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "saeprobe/error.hpp"
#include "saeprobe/text_normalize.hpp"

namespace saeprobe {

using nlohmann::json;

std::string_view to_string(LexiconKind kind) {
  switch (kind) {
    case LexiconKind::religion: return "religion";
    case LexiconKind::bias_probe: return "bias_probe";
    case LexiconKind::crime_index: return "crime_index";
    case LexiconKind::geo_region: return "geo_region";
  }
  return "religion";
}

LexiconKind lexicon_kind_from_string(std::string_view name) {
  if (name == "religion") return LexiconKind::religion;
  if (name == "bias_probe") return LexiconKind::bias_probe;
  if (name == "crime_index") return LexiconKind::crime_index;
  if (name == "geo_region") return LexiconKind::geo_region;
  throw Error(ErrorKind::schema, "unknown lexicon kind '" + std::string(name) + "'");
}

namespace {

std::string position_of(std::string_view document, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < document.size(); ++i) {
    if (document[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

const json& require_field(const json& entry, const char* field, std::size_t index) {
  auto it = entry.find(field);
  if (it == entry.end()) {
    throw Error(ErrorKind::schema,
                "lexicons[" + std::to_string(index) + "] is missing field '" + field + "'");
  }
  return *it;
}

std::string require_string(const json& entry, const char* field, std::size_t index) {
  const json& value = require_field(entry, field, index);
  if (!value.is_string()) {
    throw Error(ErrorKind::schema,
                "lexicons[" + std::to_string(index) + "]." + field + " must be a string");
  }
  return value.get<std::string>();
}

ConceptLexicon lexicon_from_json(const json& entry, std::size_t index) {
  if (!entry.is_object()) {
    throw Error(ErrorKind::schema, "lexicons[" + std::to_string(index) + "] must be an object");
  }
  ConceptLexicon lex;
  lex.category_id = require_string(entry, "category_id", index);
  lex.display_name = require_string(entry, "display_name", index);
  lex.kind = lexicon_kind_from_string(require_string(entry, "kind", index));

  const json& terms = require_field(entry, "terms", index);
  if (!terms.is_array()) {
    throw Error(ErrorKind::schema, "lexicons[" + std::to_string(index) + "].terms must be an array");
  }
  for (const json& term : terms) {
    if (!term.is_string()) {
      throw Error(ErrorKind::schema,
                  "lexicons[" + std::to_string(index) + "].terms must contain only strings");
    }
    lex.terms.push_back(text::lowercase(term.get<std::string>()));
  }
  if (auto it = entry.find("template_overrides"); it != entry.end()) {
    if (!it->is_object()) {
      throw Error(ErrorKind::schema,
                  "lexicons[" + std::to_string(index) + "].template_overrides must be an object");
    }
    for (const auto& [term, sentence] : it->items()) {
      if (!sentence.is_string()) {
        throw Error(ErrorKind::schema, "template override for '" + term + "' must be a string");
      }
      lex.template_overrides[text::lowercase(term)] = sentence.get<std::string>();
    }
  }
  if (auto it = entry.find("notes"); it != entry.end() && it->is_string()) {
    lex.notes = it->get<std::string>();
  }
  return lex;
}

bool icontains(std::string_view haystack, std::string_view needle) {
  return text::lowercase(haystack).find(text::lowercase(needle)) != std::string::npos;
}

}  // namespace

void validate_lexicon(const ConceptLexicon& lexicon) {
  const std::string where = "lexicon '" + lexicon.category_id + "'";
  if (lexicon.category_id.empty()) throw Error(ErrorKind::validation, "empty category_id");
  if (lexicon.terms.empty()) throw Error(ErrorKind::validation, where + " has an empty term list");
  std::set<std::string> seen;
  for (const auto& term : lexicon.terms) {
    if (term.empty()) throw Error(ErrorKind::validation, where + " contains an empty term");
    if (text::lowercase(term) != term) {
      throw Error(ErrorKind::validation, where + " term '" + term + "' is not lowercase");
    }
    if (!seen.insert(term).second) {
      throw Error(ErrorKind::validation, where + " repeats term '" + term + "'");
    }
  }
  for (const auto& [term, sentence] : lexicon.template_overrides) {
    if (!seen.contains(term)) {
      throw Error(ErrorKind::validation,
                  where + " overrides '" + term + "', which is not one of its terms");
    }
    if (!is_valid_prompt_text(sentence, term)) {
      throw Error(ErrorKind::validation, where + " override for '" + term +
                                             "' must be one sentence ending in '.' containing the term");
    }
  }
}

bool is_valid_prompt_text(std::string_view text, std::string_view term) {
  if (text.empty() || text.back() != '.') return false;
  const std::string_view body = text.substr(0, text.size() - 1);
  if (body.find_first_of(".!?") != std::string_view::npos) return false;
  if (body.find('\n') != std::string_view::npos) return false;
  return icontains(text, term);
}

std::vector<ConceptLexicon> parse_lexicons(std::string_view document) {
  json root;
  try {
    root = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::schema,
                "lexicon file is not valid JSON at " + position_of(document, e.byte > 0 ? e.byte - 1 : 0) +
                    ": " + e.what());
  }
  if (!root.is_object() || !root.contains("lexicons") || !root["lexicons"].is_array()) {
    throw Error(ErrorKind::schema, "lexicon file needs a top-level 'lexicons' array");
  }
  std::vector<ConceptLexicon> out;
  std::set<std::string> ids;
  std::size_t index = 0;
  for (const json& entry : root["lexicons"]) {
    ConceptLexicon lex = lexicon_from_json(entry, index++);
    if (!ids.insert(lex.category_id).second) {
      throw Error(ErrorKind::conflict, "duplicate category_id '" + lex.category_id + "'");
    }
    validate_lexicon(lex);
    out.push_back(std::move(lex));
  }
  return out;
}

std::vector<ConceptLexicon> load_lexicons(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::configuration, "cannot open lexicon file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_lexicons(buffer.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string serialize_lexicons(std::span<const ConceptLexicon> lexicons) {
  json entries = json::array();
  for (const auto& lex : lexicons) {
    json entry = {{"category_id", lex.category_id},
                  {"display_name", lex.display_name},
                  {"kind", std::string(to_string(lex.kind))},
                  {"terms", lex.terms}};
    if (!lex.template_overrides.empty()) entry["template_overrides"] = lex.template_overrides;
    if (!lex.notes.empty()) entry["notes"] = lex.notes;
    entries.push_back(std::move(entry));
  }
  return json{{"lexicons", std::move(entries)}}.dump(2) + "\n";
}

std::vector<Prompt> render_prompts(const ConceptLexicon& lexicon, std::string_view default_template) {
  static constexpr std::string_view kPlaceholder = "{term}";
  std::size_t placeholders = 0;
  std::size_t at = 0;
  for (std::size_t pos = default_template.find(kPlaceholder); pos != std::string_view::npos;
       pos = default_template.find(kPlaceholder, pos + kPlaceholder.size())) {
    ++placeholders;
    at = pos;
  }
  if (placeholders != 1) {
    throw Error(ErrorKind::template_syntax,
                "prompt template must contain exactly one {term} placeholder, found " +
                    std::to_string(placeholders));
  }
  if (default_template.empty() || default_template.back() != '.') {
    throw Error(ErrorKind::template_syntax, "prompt template must end with a period");
  }

  std::vector<Prompt> prompts;
  prompts.reserve(lexicon.terms.size());
  for (const auto& term : lexicon.terms) {
    Prompt prompt{lexicon.category_id, term, {}};
    if (auto it = lexicon.template_overrides.find(term); it != lexicon.template_overrides.end()) {
      prompt.text = it->second;
    } else {
      prompt.text.assign(default_template.substr(0, at));
      prompt.text.append(term);
      prompt.text.append(default_template.substr(at + kPlaceholder.size()));
    }
    if (!is_valid_prompt_text(prompt.text, term)) {
      throw Error(ErrorKind::template_syntax, "rendered prompt '" + prompt.text + "' is not one sentence");
    }
    prompts.push_back(std::move(prompt));
  }
  return prompts;
}

const ConceptLexicon& find_lexicon(std::span<const ConceptLexicon> lexicons, std::string_view name) {
  const std::string wanted = text::lowercase(name);
  for (const auto& lex : lexicons) {
    if (text::lowercase(lex.category_id) == wanted || text::lowercase(lex.display_name) == wanted) {
      return lex;
    }
  }
  throw Error(ErrorKind::not_found, "no lexicon named '" + std::string(name) + "'");
}

std::vector<ConceptLexicon> lexicons_of_kind(std::span<const ConceptLexicon> lexicons, LexiconKind kind) {
  std::vector<ConceptLexicon> out;
  std::copy_if(lexicons.begin(), lexicons.end(), std::back_inserter(out),
               [kind](const ConceptLexicon& lex) { return lex.kind == kind; });
  return out;
}

}  // namespace saeprobe
