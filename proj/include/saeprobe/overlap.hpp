#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saeprobe/activation.hpp"

namespace saeprobe {

// Source set used for feature sets pooled across every SAE of one model.
inline constexpr std::string_view kPooledSourceSet = "*";

// Keys sorted ascending, no duplicates. A pooled scope (source set "*")
// admits keys from any source set of the scope's model.
struct FeatureSet {
  TargetId scope;
  std::vector<FeatureKey> keys;

  std::size_t size() const { return keys.size(); }
  bool empty() const { return keys.empty(); }
  bool contains(const FeatureKey& key) const;
  bool operator==(const FeatureSet&) const = default;
};

bool in_scope(const TargetId& scope, const FeatureKey& key);

// Builds a set from arbitrary keys; throws Error{validation} for keys
// outside the scope.
FeatureSet make_feature_set(TargetId scope, std::vector<FeatureKey> keys);

enum class IntraDefinition { multi_occurrence, pairwise_mean, global_intersection };

std::string_view to_string(IntraDefinition definition);
IntraDefinition intra_definition_from_string(std::string_view name);

// Keys of the first min(k, size) features in canonical order.
FeatureSet top_k_set(const ActivationRecord& record, std::size_t k);

// Re-labels records of several SAEs of one model so they can be analysed
// together; feature keys keep their own source set, so equal indices from
// different SAEs stay distinct.
std::vector<ActivationRecord> pool_by_model(std::span<const ActivationRecord> records);

// All three functions below require at least one record and a single shared
// target (or a single model for pooled records); otherwise Error{validation}.
//
// multi_occurrence: distinct keys present in the top-k sets of >= 2 prompts.
// pairwise_mean: mean |S_i & S_j| over unordered prompt pairs (0 for one prompt).
// global_intersection: size of the intersection of every prompt's set.
double intra_group_overlap(std::span<const ActivationRecord> records, IntraDefinition definition, std::size_t k);

FeatureSet union_features(std::span<const ActivationRecord> records, std::size_t k);

// Distinct features across every religion's prompts.
std::size_t combined_unique(std::span<const ActivationRecord> records, std::size_t k);

// |a & b|. Throws Error{validation} when the scopes differ.
std::size_t inter_group_overlap(const FeatureSet& a, const FeatureSet& b);

// |a & b| / sqrt(|a| |b|). Throws Error{undefined_metric} for an empty operand.
double binary_cosine(const FeatureSet& a, const FeatureSet& b);

// raw[r] / mean(raw) * 100, unrounded. Throws Error{validation} on an empty
// map and Error{undefined_metric} when every raw value is zero.
std::map<std::string, double> violence_association_index(const std::map<std::string, std::uint64_t>& raw);

// Nearest integer, halves away from zero for positive inputs (96.5 -> 97).
std::int64_t round_half_up(double value);

struct OverlapReport {
  SaeTarget target;
  std::vector<std::string> religions;  // reporting order
  std::map<std::string, double> per_religion_intra;
  std::map<std::string, std::uint64_t> per_religion_union;
  std::uint64_t combined_unique = 0;
  std::uint64_t bias_union = 0;
  std::map<std::string, std::uint64_t> per_religion_inter;
  std::map<std::string, double> per_religion_vai;
  IntraDefinition intra_definition = IntraDefinition::multi_occurrence;
  std::size_t k_used = 20;
  bool pooled = false;

  bool operator==(const OverlapReport&) const = default;
};

struct ReligionRecords {
  std::string religion;
  std::vector<ActivationRecord> records;
};

// Intra, union, inter-with-bias, combined and VAI for one target. VAI is
// left empty when every inter-group overlap is zero.
OverlapReport compute_overlap_report(const SaeTarget& target, std::span<const ReligionRecords> religions,
                                     std::span<const ActivationRecord> bias_records, IntraDefinition definition,
                                     std::size_t k);

}  // namespace saeprobe
