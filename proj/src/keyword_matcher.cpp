#include "saeprobe/keyword_matcher.hpp"

#include <deque>

#include "saeprobe/error.hpp"
#include "saeprobe/text_normalize.hpp"

namespace saeprobe {

std::string_view to_string(Boundary boundary) {
  return boundary == Boundary::word_boundary ? "word" : "substring";
}

Boundary boundary_from_string(std::string_view name) {
  if (name == "word" || name == "word_boundary") return Boundary::word_boundary;
  if (name == "substring") return Boundary::substring;
  throw Error(ErrorKind::usage, "unknown match boundary '" + std::string(name) + "'");
}

std::string describe(const MatchPolicy& policy) {
  return std::string("case=insensitive boundary=") + std::string(to_string(policy.boundary)) +
         " unicode_fold=" + (policy.unicode_fold ? "true" : "false");
}

KeywordMatcher::KeywordMatcher(std::vector<std::string> keywords, MatchPolicy policy)
    : keywords_(std::move(keywords)), policy_(policy) {
  next_.push_back({});
  next_[0].fill(-1);
  outputs_.emplace_back();

  patterns_.reserve(keywords_.size());
  for (std::uint32_t id = 0; id < keywords_.size(); ++id) {
    std::string pattern = text::normalize_for_matching(keywords_[id], policy_.unicode_fold);
    if (policy_.boundary == Boundary::substring) pattern = pattern.substr(1, pattern.size() - 2);
    patterns_.push_back(pattern);
    if (pattern.empty() || pattern == " ") continue;  // no word characters: never matches

    std::int32_t state = 0;
    for (unsigned char c : pattern) {
      if (next_[state][c] < 0) {
        next_[state][c] = static_cast<std::int32_t>(next_.size());
        next_.push_back({});
        next_.back().fill(-1);
        outputs_.emplace_back();
      }
      state = next_[state][c];
    }
    outputs_[state].push_back(id);
  }

  // Breadth-first failure computation, folding failure transitions into a
  // complete DFA table.
  std::vector<std::int32_t> fail(next_.size(), 0);
  output_link_.assign(next_.size(), -1);
  std::deque<std::int32_t> queue;
  for (int c = 0; c < 256; ++c) {
    std::int32_t child = next_[0][c];
    if (child < 0) {
      next_[0][c] = 0;
    } else {
      fail[child] = 0;
      queue.push_back(child);
    }
  }
  while (!queue.empty()) {
    const std::int32_t state = queue.front();
    queue.pop_front();
    const std::int32_t f = fail[state];
    output_link_[state] = outputs_[f].empty() ? output_link_[f] : f;
    for (int c = 0; c < 256; ++c) {
      std::int32_t child = next_[state][c];
      if (child < 0) {
        next_[state][c] = next_[f][c];
      } else {
        fail[child] = next_[f][c];
        queue.push_back(child);
      }
    }
  }
}

template <typename OnMatch>
void KeywordMatcher::scan(std::string_view normalized, OnMatch&& on_match) const {
  std::int32_t state = 0;
  for (unsigned char c : normalized) {
    state = next_[state][c];
    for (std::int32_t s = outputs_[state].empty() ? output_link_[state] : state; s >= 0; s = output_link_[s]) {
      for (std::uint32_t id : outputs_[s]) on_match(id);
    }
  }
}

std::vector<std::uint32_t> KeywordMatcher::count(std::string_view text) const {
  std::vector<std::uint32_t> counts(keywords_.size(), 0);
  scan(text::normalize_for_matching(text, policy_.unicode_fold), [&](std::uint32_t id) { ++counts[id]; });
  return counts;
}

std::set<std::string> KeywordMatcher::matched(std::string_view text) const {
  std::set<std::string> out;
  scan(text::normalize_for_matching(text, policy_.unicode_fold),
       [&](std::uint32_t id) { out.insert(keywords_[id]); });
  return out;
}

std::uint64_t KeywordMatcher::total_occurrences(std::string_view text) const {
  std::uint64_t total = 0;
  scan(text::normalize_for_matching(text, policy_.unicode_fold), [&](std::uint32_t) { ++total; });
  return total;
}

bool KeywordMatcher::any(std::string_view text) const { return total_occurrences(text) > 0; }

std::set<std::string> match_keywords(std::string_view text, std::span<const std::string> keywords,
                                     const MatchPolicy& policy) {
  return KeywordMatcher({keywords.begin(), keywords.end()}, policy).matched(text);
}

}  // namespace saeprobe
