#pragma once

// Builds a fixture cache whose overlap statistics equal the published overlap columns.
//
// For one column with combined count G and largest inter count M:
//   V = feature indices [0, M) form the violence (bias) union,
//   N = [M, G) are religion-only features.
// Religion r uses U_r = V[0, inter_r) + N[0, x_r) with x_r = max(intra_r - inter_r, 0),
// except one religion that takes all of N so the union reaches G.
// The first intra_r features of U_r are placed in two different prompts, the rest in one,
// which makes the multi-occurrence count equal intra_r.
//
// The Gemma-2-9b column cannot be built: its Islam inter count (22) exceeds the
// combined unique count (18), and every inter-group feature is also a religion feature.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "saeprobe/fixture_store.hpp"
#include "saeprobe/lexicon.hpp"

namespace published {

inline bool constructible(const oracle::PublishedColumn& column) {
  for (int r = 0; r < 5; ++r) {
    if (column.inter[r] > column.combined || column.intra[r] > column.combined) return false;
  }
  return true;
}

inline saeprobe::ActivationRecord record_with(const saeprobe::SaeTarget& target, const saeprobe::Prompt& prompt,
                                              const std::vector<std::uint32_t>& indices) {
  saeprobe::ActivationRecord record;
  record.prompt = prompt;
  record.target = target;
  record.retrieved_at = "2025-01-01T00:00:00Z";
  record.provenance = saeprobe::Provenance::cache;
  double value = 60.0;
  for (auto index : indices) {
    record.features.push_back({{target.id(), 0, index}, value, {}});
    value -= 1.0;
  }
  saeprobe::canonicalize(record, 20);
  return record;
}

inline void write(const std::filesystem::path& dir, const saeprobe::SaeTarget& target,
                  const saeprobe::Prompt& prompt, const std::vector<std::uint32_t>& indices) {
  const auto record = record_with(target, prompt, indices);
  const saeprobe::CacheKey key{target.id(), prompt.text, 20};
  saeprobe::write_file_atomic(saeprobe::cache_entry_path(dir, key), saeprobe::serialize_cache_entry(key, record));
}

// Spreads `slots` round-robin over the prompts; equal neighbours land in different prompts.
inline std::vector<std::vector<std::uint32_t>> spread(const std::vector<std::uint32_t>& slots, std::size_t prompts) {
  std::vector<std::vector<std::uint32_t>> out(prompts);
  for (std::size_t i = 0; i < slots.size(); ++i) out[i % prompts].push_back(slots[i]);
  for (const auto& p : out) {
    if (p.size() > 20) throw std::logic_error("published fixture needs more than 20 features in a prompt");
  }
  return out;
}

inline void build_column(const std::filesystem::path& dir, const oracle::PublishedColumn& column,
                         const saeprobe::SaeTarget& target, const std::vector<saeprobe::ConceptLexicon>& religions,
                         const saeprobe::ConceptLexicon& bias) {
  if (!constructible(column)) throw std::logic_error(std::string(column.model) + " column is not constructible");
  int m = 0;
  for (int r = 0; r < 5; ++r) m = std::max(m, column.inter[r]);
  const int n_size = column.combined - m;

  // religion that absorbs the whole of N
  int widest = 0;
  int widest_x = -1;
  for (int r = 0; r < 5; ++r) {
    const int x = std::max(column.intra[r] - column.inter[r], 0);
    if (x > widest_x) {
      widest_x = x;
      widest = r;
    }
  }

  for (int r = 0; r < 5; ++r) {
    std::vector<std::uint32_t> u;
    for (int i = 0; i < column.inter[r]; ++i) u.push_back(static_cast<std::uint32_t>(i));
    const int x = r == widest ? n_size : std::max(column.intra[r] - column.inter[r], 0);
    if (x > n_size) throw std::logic_error("religion-only block too small");
    for (int i = 0; i < x; ++i) u.push_back(static_cast<std::uint32_t>(m + i));

    std::vector<std::uint32_t> slots;
    for (std::size_t i = 0; i < u.size(); ++i) {
      slots.push_back(u[i]);
      if (static_cast<int>(i) < column.intra[r]) slots.push_back(u[i]);
    }
    const auto prompts = saeprobe::render_prompts(religions[static_cast<std::size_t>(r)]);
    const auto per_prompt = spread(slots, prompts.size());
    for (std::size_t p = 0; p < prompts.size(); ++p) write(dir, target, prompts[p], per_prompt[p]);
  }

  std::vector<std::uint32_t> violence;
  for (int i = 0; i < m; ++i) violence.push_back(static_cast<std::uint32_t>(i));
  const auto prompts = saeprobe::render_prompts(bias);
  const auto per_prompt = spread(violence, prompts.size());
  for (std::size_t p = 0; p < prompts.size(); ++p) write(dir, target, prompts[p], per_prompt[p]);
}

}  // namespace published
