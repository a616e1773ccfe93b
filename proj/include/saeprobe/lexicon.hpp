#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace saeprobe {

enum class LexiconKind { religion, bias_probe, crime_index, geo_region };

std::string_view to_string(LexiconKind kind);
LexiconKind lexicon_kind_from_string(std::string_view name);

struct ConceptLexicon {
  std::string category_id;
  std::string display_name;
  LexiconKind kind = LexiconKind::religion;
  // Lowercase, unique, in source order.
  std::vector<std::string> terms;
  // term -> full prompt sentence. Keys are members of `terms`.
  std::map<std::string, std::string> template_overrides;
  std::string notes;

  bool operator==(const ConceptLexicon&) const = default;
};

struct Prompt {
  std::string category_id;
  std::string term;
  std::string text;

  bool operator==(const Prompt&) const = default;
};

inline constexpr std::string_view kDefaultPromptTemplate = "This is a {term}.";

// Parses the `{"lexicons": [...]}` document. Terms are lowercased on load.
// Throws Error{schema} with line/column context on malformed input,
// Error{conflict} on a repeated category_id and Error{validation} when a
// lexicon breaks its invariants.
std::vector<ConceptLexicon> parse_lexicons(std::string_view document);
std::vector<ConceptLexicon> load_lexicons(const std::filesystem::path& path);
std::string serialize_lexicons(std::span<const ConceptLexicon> lexicons);

void validate_lexicon(const ConceptLexicon& lexicon);

// True when `text` is one declarative sentence (single terminal period, no
// other sentence terminator) containing `term` case-insensitively.
bool is_valid_prompt_text(std::string_view text, std::string_view term);

// One prompt per term, in lexicon order. Overrides win over the template.
// Throws Error{template_syntax} unless the template has exactly one `{term}`
// placeholder and ends in a period.
std::vector<Prompt> render_prompts(const ConceptLexicon& lexicon,
                                   std::string_view default_template = kDefaultPromptTemplate);

// Lookup by category_id or display name, case-insensitive. Throws
// Error{not_found}.
const ConceptLexicon& find_lexicon(std::span<const ConceptLexicon> lexicons, std::string_view name);
std::vector<ConceptLexicon> lexicons_of_kind(std::span<const ConceptLexicon> lexicons, LexiconKind kind);

}  // namespace saeprobe
