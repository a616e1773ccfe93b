#include "saeprobe/overlap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "saeprobe/error.hpp"

namespace saeprobe {

bool FeatureSet::contains(const FeatureKey& key) const {
  return std::binary_search(keys.begin(), keys.end(), key);
}

bool in_scope(const TargetId& scope, const FeatureKey& key) {
  if (scope.source_set == kPooledSourceSet) return key.target.model_id == scope.model_id;
  return key.target == scope;
}

FeatureSet make_feature_set(TargetId scope, std::vector<FeatureKey> keys) {
  for (const auto& key : keys) {
    if (!in_scope(scope, key)) {
      throw Error(ErrorKind::validation, "feature of " + key.target.label() + " in a set for " + scope.label());
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return {std::move(scope), std::move(keys)};
}

std::string_view to_string(IntraDefinition definition) {
  switch (definition) {
    case IntraDefinition::multi_occurrence: return "multi_occurrence";
    case IntraDefinition::pairwise_mean: return "pairwise_mean";
    case IntraDefinition::global_intersection: return "global_intersection";
  }
  return "multi_occurrence";
}

IntraDefinition intra_definition_from_string(std::string_view name) {
  if (name == "multi_occurrence" || name == "multi") return IntraDefinition::multi_occurrence;
  if (name == "pairwise_mean" || name == "pairwise") return IntraDefinition::pairwise_mean;
  if (name == "global_intersection" || name == "intersect") return IntraDefinition::global_intersection;
  throw Error(ErrorKind::usage, "unknown intra-group definition '" + std::string(name) + "'");
}

FeatureSet top_k_set(const ActivationRecord& record, std::size_t k) {
  std::vector<FeatureKey> keys;
  const std::size_t n = std::min(k, record.features.size());
  keys.reserve(n);
  for (std::size_t i = 0; i < n; ++i) keys.push_back(record.features[i].key);
  return make_feature_set(record.target.id(), std::move(keys));
}

std::vector<ActivationRecord> pool_by_model(std::span<const ActivationRecord> records) {
  std::vector<ActivationRecord> out(records.begin(), records.end());
  for (auto& record : out) record.target.source_set = std::string(kPooledSourceSet);
  return out;
}

namespace {

TargetId shared_scope(std::span<const ActivationRecord> records) {
  if (records.empty()) throw Error(ErrorKind::validation, "no records given");
  const TargetId scope = records.front().target.id();
  for (const auto& record : records) {
    if (record.target.id() != scope) {
      throw Error(ErrorKind::validation,
                  "records mix targets " + scope.label() + " and " + record.target.label());
    }
  }
  return scope;
}

std::vector<FeatureSet> top_k_sets(std::span<const ActivationRecord> records, std::size_t k) {
  std::vector<FeatureSet> sets;
  sets.reserve(records.size());
  for (const auto& record : records) sets.push_back(top_k_set(record, k));
  return sets;
}

std::size_t intersection_size(const std::vector<FeatureKey>& a, const std::vector<FeatureKey>& b) {
  std::size_t count = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++count;
      ++i;
      ++j;
    }
  }
  return count;
}

}  // namespace

double intra_group_overlap(std::span<const ActivationRecord> records, IntraDefinition definition, std::size_t k) {
  shared_scope(records);
  const std::vector<FeatureSet> sets = top_k_sets(records, k);

  switch (definition) {
    case IntraDefinition::multi_occurrence: {
      std::map<FeatureKey, std::size_t> counts;
      for (const auto& set : sets) {
        for (const auto& key : set.keys) ++counts[key];
      }
      return static_cast<double>(
          std::count_if(counts.begin(), counts.end(), [](const auto& kv) { return kv.second >= 2; }));
    }
    case IntraDefinition::pairwise_mean: {
      if (sets.size() < 2) return 0.0;
      std::uint64_t total = 0;
      for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = i + 1; j < sets.size(); ++j) total += intersection_size(sets[i].keys, sets[j].keys);
      }
      const double pairs = static_cast<double>(sets.size()) * static_cast<double>(sets.size() - 1) / 2.0;
      return static_cast<double>(total) / pairs;
    }
    case IntraDefinition::global_intersection: {
      std::vector<FeatureKey> common = sets.front().keys;
      for (std::size_t i = 1; i < sets.size() && !common.empty(); ++i) {
        std::vector<FeatureKey> next;
        std::set_intersection(common.begin(), common.end(), sets[i].keys.begin(), sets[i].keys.end(),
                              std::back_inserter(next));
        common = std::move(next);
      }
      return static_cast<double>(common.size());
    }
  }
  return 0.0;
}

FeatureSet union_features(std::span<const ActivationRecord> records, std::size_t k) {
  const TargetId scope = shared_scope(records);
  std::vector<FeatureKey> keys;
  for (const auto& record : records) {
    const std::size_t n = std::min(k, record.features.size());
    for (std::size_t i = 0; i < n; ++i) keys.push_back(record.features[i].key);
  }
  return make_feature_set(scope, std::move(keys));
}

std::size_t combined_unique(std::span<const ActivationRecord> records, std::size_t k) {
  return union_features(records, k).size();
}

std::size_t inter_group_overlap(const FeatureSet& a, const FeatureSet& b) {
  if (a.scope != b.scope) {
    throw Error(ErrorKind::validation, "cannot compare features of " + a.scope.label() + " and " + b.scope.label());
  }
  return intersection_size(a.keys, b.keys);
}

double binary_cosine(const FeatureSet& a, const FeatureSet& b) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorKind::undefined_metric, "cosine similarity of an empty feature set is undefined");
  }
  const double shared = static_cast<double>(inter_group_overlap(a, b));
  return shared / std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

std::map<std::string, double> violence_association_index(const std::map<std::string, std::uint64_t>& raw) {
  if (raw.empty()) throw Error(ErrorKind::validation, "violence association index needs at least one group");
  long double total = 0;
  for (const auto& [group, value] : raw) total += static_cast<long double>(value);
  if (total == 0) {
    throw Error(ErrorKind::undefined_metric, "every inter-group overlap is zero; the mean is undefined");
  }
  std::map<std::string, double> index;
  const long double n = static_cast<long double>(raw.size());
  for (const auto& [group, value] : raw) {
    // value / (total / n) * 100, ordered to keep uniform inputs exactly 100.
    index[group] = static_cast<double>(static_cast<long double>(value) * n * 100.0L / total);
  }
  return index;
}

std::int64_t round_half_up(double value) { return static_cast<std::int64_t>(std::floor(value + 0.5)); }

OverlapReport compute_overlap_report(const SaeTarget& target, std::span<const ReligionRecords> religions,
                                     std::span<const ActivationRecord> bias_records, IntraDefinition definition,
                                     std::size_t k) {
  if (religions.empty()) throw Error(ErrorKind::validation, "no religion groups selected");
  OverlapReport report;
  report.target = target;
  report.intra_definition = definition;
  report.k_used = k;
  report.pooled = target.source_set == kPooledSourceSet;

  const FeatureSet bias = union_features(bias_records, k);
  if (bias.scope != target.id()) {
    throw Error(ErrorKind::validation, "bias records belong to " + bias.scope.label());
  }
  report.bias_union = bias.size();

  std::vector<ActivationRecord> all;
  for (const auto& group : religions) {
    const FeatureSet u = union_features(group.records, k);
    if (u.scope != target.id()) {
      throw Error(ErrorKind::validation, group.religion + " records belong to " + u.scope.label());
    }
    report.religions.push_back(group.religion);
    report.per_religion_intra[group.religion] = intra_group_overlap(group.records, definition, k);
    report.per_religion_union[group.religion] = u.size();
    report.per_religion_inter[group.religion] = inter_group_overlap(u, bias);
    all.insert(all.end(), group.records.begin(), group.records.end());
  }
  report.combined_unique = combined_unique(all, k);

  const bool any_overlap = std::any_of(report.per_religion_inter.begin(), report.per_religion_inter.end(),
                                       [](const auto& kv) { return kv.second > 0; });
  if (any_overlap) report.per_religion_vai = violence_association_index(report.per_religion_inter);
  return report;
}

}  // namespace saeprobe
