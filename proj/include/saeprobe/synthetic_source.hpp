#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "saeprobe/activation.hpp"
#include "saeprobe/lexicon.hpp"

namespace saeprobe {

// Each generated text independently gains one sentence mentioning a keyword
// drawn uniformly from `keywords`, with probability `rate`.
struct KeywordInjection {
  std::string label;
  std::vector<std::string> keywords;
  double rate = 0.0;
};

struct FeaturePool {
  std::string id;
  std::uint32_t size = 0;
  // Injections applied to the activation texts of this pool's features.
  std::vector<KeywordInjection> injections;
};

// Ties a prompt category to a pool. Each pool feature is linked to the
// category with probability `strength` (drawn once per target and seed);
// every prompt of the category then activates each linked feature with
// probability `prompt_rate`.
struct PoolMembership {
  std::string category;
  std::string pool;
  double strength = 1.0;
  double prompt_rate = 1.0;
};

struct SyntheticSpec {
  std::vector<FeaturePool> pools;
  std::vector<PoolMembership> memberships;
  std::uint32_t layer = 0;
  std::size_t texts_per_feature = 20;
  double min_activation = 0.5;
  double max_activation = 50.0;
};

// Throws Error{validation} on out-of-range probabilities, unknown or
// duplicate pools, or when the pools need more than `feature_count` indices.
void validate_synthetic_spec(const SyntheticSpec& spec, std::uint32_t feature_count);

// Injections may name a lexicon ({"lexicon": "crime", "rate": 0.03}) instead
// of listing keywords; names resolve against `lexicons`.
SyntheticSpec parse_synthetic_spec(std::string_view document, std::span<const ConceptLexicon> lexicons);
nlohmann::json to_json(const SyntheticSpec& spec);

// Private pool per religion and per bias category plus one pool shared by
// all of them, equal association strengths, uniform crime and region
// keyword injection.
SyntheticSpec default_synthetic_spec(std::span<const ConceptLexicon> lexicons);

// Deterministic stream of uniform draws. The conversion to [0,1) is fixed
// here rather than left to <random> distributions so streams are identical
// across standard library implementations.
class SyntheticRng {
 public:
  explicit SyntheticRng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::string_view> context);

// One neutral sentence plus the sentences of whichever injections fire.
std::string synthesize_text(SyntheticRng& rng, std::span<const KeywordInjection> injections);

std::vector<std::string> synthetic_corpus(std::size_t count, std::span<const KeywordInjection> injections,
                                          std::uint64_t seed);

class SyntheticSource final : public ActivationSource {
 public:
  SyntheticSource(SyntheticSpec spec, std::uint64_t seed, TargetRegistry registry);
  SyntheticSource(const SyntheticSource&) = delete;
  SyntheticSource& operator=(const SyntheticSource&) = delete;

  ActivationRecord fetch_top_features(const SaeTarget& target, const Prompt& prompt, std::size_t k) override;
  std::vector<std::string> fetch_feature_texts(const FeatureKey& key, std::size_t max_texts) override;

  // Ground truth for tests: the pool features linked to `category`.
  std::vector<FeatureKey> planted_links(const SaeTarget& target, std::string_view category,
                                        std::string_view pool) const;
  std::vector<FeatureKey> pool_features(const SaeTarget& target, std::string_view pool) const;

  const SyntheticSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }

 private:
  struct PoolSlot {
    const FeaturePool* pool;
    std::uint32_t offset;
  };

  const PoolSlot& slot(std::string_view pool) const;
  std::vector<bool> links(const SaeTarget& target, const PoolMembership& membership) const;
  std::vector<std::string> texts_for(const FeatureKey& key) const;

  SyntheticSpec spec_;
  std::uint64_t seed_;
  TargetRegistry registry_;
  std::vector<PoolSlot> slots_;
  std::uint32_t used_indices_ = 0;
};

std::unique_ptr<ActivationSource> make_synthetic_source(SyntheticSpec spec, std::uint64_t seed,
                                                        TargetRegistry registry);

}  // namespace saeprobe
