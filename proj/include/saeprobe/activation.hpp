#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "saeprobe/lexicon.hpp"

namespace saeprobe {

enum class HookKind { residual, attention };

std::string_view to_string(HookKind kind);
HookKind hook_kind_from_string(std::string_view name);

// Identity of one SAE release: a (model, source set) pair.
struct TargetId {
  std::string model_id;
  std::string source_set;

  auto operator<=>(const TargetId&) const = default;
  std::string label() const { return model_id + "/" + source_set; }
};

struct SaeTarget {
  std::string model_id;
  std::string source_set;
  std::uint32_t feature_count = 0;
  HookKind hook_kind = HookKind::residual;
  std::string short_name;

  TargetId id() const { return {model_id, source_set}; }
  std::string label() const { return id().label(); }
  bool operator==(const SaeTarget&) const = default;
};

class TargetRegistry {
 public:
  TargetRegistry() = default;
  explicit TargetRegistry(std::vector<SaeTarget> targets);

  static TargetRegistry parse(std::string_view document);
  static TargetRegistry load(const std::filesystem::path& path);

  // Throws Error{conflict} on a repeated (model, source set) pair and
  // Error{validation} on a zero feature count.
  void add(SaeTarget target);

  const SaeTarget* find(const TargetId& id) const;
  // Throws Error{configuration} for unknown targets.
  const SaeTarget& require(const TargetId& id) const;

  // "all", "model/source_set" or a bare model id (every source set of it).
  std::vector<SaeTarget> select(std::string_view selector) const;

  const std::vector<SaeTarget>& targets() const { return targets_; }

 private:
  std::vector<SaeTarget> targets_;
};

struct FeatureKey {
  TargetId target;
  std::uint32_t layer = 0;
  std::uint32_t index = 0;

  auto operator<=>(const FeatureKey&) const = default;
};

struct FeatureActivation {
  FeatureKey key;
  double activation_value = 0.0;
  std::vector<std::string> top_texts;

  bool operator==(const FeatureActivation&) const = default;
};

enum class Provenance { live, cache, synthetic };

std::string_view to_string(Provenance provenance);
Provenance provenance_from_string(std::string_view name);

struct ActivationRecord {
  Prompt prompt;
  SaeTarget target;
  std::vector<FeatureActivation> features;
  std::string retrieved_at;  // ISO-8601 UTC
  Provenance provenance = Provenance::synthetic;

  bool operator==(const ActivationRecord&) const = default;
};

// Rounds to 6 significant digits, the precision records are stored at.
double quantize_activation(double value);

// Quantizes activation values, sorts features by descending activation with
// ties broken by ascending (layer, index), and truncates to k when given.
// Throws Error{validation} on negative values, duplicate keys, keys outside
// the record's target, or indices beyond the target's feature count.
void canonicalize(ActivationRecord& record, std::optional<std::size_t> k = std::nullopt);

bool satisfies_ordering(const ActivationRecord& record);

nlohmann::json to_json(const SaeTarget& target);
SaeTarget target_from_json(const nlohmann::json& value);
nlohmann::json to_json(const ActivationRecord& record);
// Throws Error{schema} on missing or mistyped fields.
ActivationRecord record_from_json(const nlohmann::json& value);

// Stable text form: sorted keys, two-space indent, trailing newline.
std::string canonical_dump(const nlohmann::json& value);

std::string utc_timestamp_now();

// Backend for top-k activating features and their activation texts.
// Implementations are safe for concurrent use.
class ActivationSource {
 public:
  virtual ~ActivationSource() = default;

  // At most k features, canonical ordering. Fewer when the backend reports
  // fewer non-zero activations.
  virtual ActivationRecord fetch_top_features(const SaeTarget& target, const Prompt& prompt,
                                              std::size_t k) = 0;

  // Up to max_texts texts in backend order; throws Error{not_found} for
  // unknown features.
  virtual std::vector<std::string> fetch_feature_texts(const FeatureKey& key, std::size_t max_texts) = 0;
};

}  // namespace saeprobe
