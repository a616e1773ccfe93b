#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "saeprobe/activation.hpp"

namespace saeprobe {

inline constexpr int kCacheSchemaVersion = 1;

struct CacheKey {
  TargetId target;
  std::string prompt_text;
  std::size_t k = 0;

  nlohmann::json to_json() const;
  // SHA-256 of the canonical key document; doubles as the entry file stem.
  std::string digest() const;
};

// One cache/fixture file: the record plus schema version, key and a SHA-256
// of the canonical record serialization.
std::string serialize_cache_entry(const CacheKey& key, const ActivationRecord& record);

struct CacheEntry {
  CacheKey key;
  ActivationRecord record;
  std::string content_hash;
};

// Throws Error{schema} on unreadable documents or a schema_version mismatch
// and Error{checksum} when the stored hash disagrees with the record.
CacheEntry parse_cache_entry(std::string_view document);

std::filesystem::path cache_entry_path(const std::filesystem::path& dir, const CacheKey& key);

using WarningSink = std::function<void(const std::string&)>;
WarningSink stderr_warnings();

// Read-only store of previously retrieved records. Lookups go by cache key;
// records come back exactly as stored, marked with cache provenance.
class FixtureSource final : public ActivationSource {
 public:
  explicit FixtureSource(std::filesystem::path dir, WarningSink warn = stderr_warnings());

  ActivationRecord fetch_top_features(const SaeTarget& target, const Prompt& prompt, std::size_t k) override;
  std::vector<std::string> fetch_feature_texts(const FeatureKey& key, std::size_t max_texts) override;

  bool contains(const SaeTarget& target, const Prompt& prompt, std::size_t k) const;

 private:
  void index_texts();

  std::filesystem::path dir_;
  WarningSink warn_;
  std::mutex mutex_;
  std::optional<std::map<FeatureKey, std::vector<std::string>>> texts_;
};

// Memoizes an inner source on disk. A hit never touches the inner source;
// a miss writes the record before returning it. Corrupt entries are
// reported through the warning sink and refetched.
class CachedSource final : public ActivationSource {
 public:
  CachedSource(std::shared_ptr<ActivationSource> inner, std::filesystem::path cache_dir,
               WarningSink warn = stderr_warnings());

  ActivationRecord fetch_top_features(const SaeTarget& target, const Prompt& prompt, std::size_t k) override;
  std::vector<std::string> fetch_feature_texts(const FeatureKey& key, std::size_t max_texts) override;

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }
  const std::filesystem::path& cache_dir() const { return dir_; }

 private:
  std::shared_ptr<ActivationSource> inner_;
  std::filesystem::path dir_;
  WarningSink warn_;
  std::mutex write_mutex_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

std::shared_ptr<ActivationSource> cached(std::shared_ptr<ActivationSource> inner,
                                         const std::filesystem::path& cache_dir,
                                         WarningSink warn = stderr_warnings());

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary file and rename, so readers never see a
// partial entry.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace saeprobe
