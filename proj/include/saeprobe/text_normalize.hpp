#pragma once

#include <string>
#include <string_view>

namespace saeprobe::text {

// Decodes UTF-8 leniently: malformed sequences become U+FFFD.
std::u32string decode_utf8(std::string_view bytes);
void append_utf8(std::string& out, char32_t cp);

// Simple case folding for ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
char32_t fold_case(char32_t cp);

// ASCII spelling of a lowercase Latin letter with diacritics ("ã" -> "a",
// "ß" -> "ss"); empty when the code point has no decomposition here.
std::string_view strip_diacritic(char32_t cp);

// Letters and digits, including every non-ASCII code point outside the
// punctuation and symbol blocks.
bool is_word_char(char32_t cp);

// Case-folds Latin/Greek/Cyrillic letters; leaves everything else untouched.
std::string lowercase(std::string_view utf8);

// Canonical matching form: case-folded (and diacritic-stripped when
// unicode_fold is set), every run of non-word characters collapsed to a
// single space, with one space of padding on both ends. "Terror-Attack!"
// becomes " terror attack ". The empty string maps to " ".
std::string normalize_for_matching(std::string_view utf8, bool unicode_fold);

}  // namespace saeprobe::text
