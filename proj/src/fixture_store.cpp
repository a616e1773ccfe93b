#include "saeprobe/fixture_store.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "saeprobe/error.hpp"
#include "saeprobe/hashing.hpp"

namespace saeprobe {

namespace fs = std::filesystem;
using nlohmann::json;

nlohmann::json CacheKey::to_json() const {
  return {{"model_id", target.model_id}, {"source_set", target.source_set}, {"prompt_text", prompt_text}, {"k", k}};
}

std::string CacheKey::digest() const { return sha256_hex(canonical_dump(to_json())); }

std::string serialize_cache_entry(const CacheKey& key, const ActivationRecord& record) {
  const json body = to_json(record);
  json entry = {{"schema_version", kCacheSchemaVersion},
                {"key", key.to_json()},
                {"content_hash", sha256_hex(canonical_dump(body))},
                {"record", body}};
  return canonical_dump(entry);
}

CacheEntry parse_cache_entry(std::string_view document) {
  json entry;
  try {
    entry = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::schema, std::string("cache entry is not valid JSON: ") + e.what());
  }
  if (!entry.is_object() || !entry.contains("schema_version") || !entry.contains("record") ||
      !entry.contains("key") || !entry.contains("content_hash")) {
    throw Error(ErrorKind::schema, "cache entry lacks schema_version/key/content_hash/record");
  }
  if (entry["schema_version"] != kCacheSchemaVersion) {
    throw Error(ErrorKind::schema, "cache entry schema_version " + entry["schema_version"].dump() +
                                       " (expected " + std::to_string(kCacheSchemaVersion) + ")");
  }
  CacheEntry out;
  out.content_hash = entry["content_hash"].get<std::string>();
  if (sha256_hex(canonical_dump(entry["record"])) != out.content_hash) {
    throw Error(ErrorKind::checksum, "cache entry content hash mismatch");
  }
  const json& key = entry["key"];
  try {
    out.key.target = {key.at("model_id").get<std::string>(), key.at("source_set").get<std::string>()};
    out.key.prompt_text = key.at("prompt_text").get<std::string>();
    out.key.k = key.at("k").get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, std::string("cache entry key: ") + e.what());
  }
  out.record = record_from_json(entry["record"]);
  return out;
}

fs::path cache_entry_path(const fs::path& dir, const CacheKey& key) { return dir / (key.digest() + ".json"); }

WarningSink stderr_warnings() {
  return [](const std::string& message) { std::cerr << "warning: " << message << "\n"; };
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::not_found, "cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id();
  fs::path tmp = path;
  tmp += suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::configuration, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::configuration, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

void check_entry_matches(const CacheEntry& entry, const CacheKey& key) {
  if (entry.key.target != key.target || entry.key.prompt_text != key.prompt_text || entry.key.k != key.k) {
    throw Error(ErrorKind::checksum, "cache entry key does not match its file name");
  }
}

}  // namespace

// ---- fixtures -------------------------------------------------------------------

FixtureSource::FixtureSource(fs::path dir, WarningSink warn) : dir_(std::move(dir)), warn_(std::move(warn)) {}

bool FixtureSource::contains(const SaeTarget& target, const Prompt& prompt, std::size_t k) const {
  return fs::exists(cache_entry_path(dir_, {target.id(), prompt.text, k}));
}

ActivationRecord FixtureSource::fetch_top_features(const SaeTarget& target, const Prompt& prompt, std::size_t k) {
  const CacheKey key{target.id(), prompt.text, k};
  const fs::path path = cache_entry_path(dir_, key);
  if (!fs::exists(path)) {
    throw Error(ErrorKind::not_found, "no stored record for " + target.label() + " / \"" + prompt.text +
                                          "\" / k=" + std::to_string(k));
  }
  CacheEntry entry = parse_cache_entry(read_file(path));
  check_entry_matches(entry, key);
  entry.record.provenance = Provenance::cache;
  return entry.record;
}

void FixtureSource::index_texts() {
  texts_.emplace();
  if (!fs::exists(dir_)) return;
  std::vector<fs::path> files;
  for (const auto& item : fs::directory_iterator(dir_)) {
    if (item.is_regular_file() && item.path().extension() == ".json" && item.path().filename() != "manifest.json") {
      files.push_back(item.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    try {
      const CacheEntry entry = parse_cache_entry(read_file(path));
      for (const auto& feature : entry.record.features) texts_->try_emplace(feature.key, feature.top_texts);
    } catch (const Error& e) {
      warn_(path.string() + ": " + e.what());
    }
  }
}

std::vector<std::string> FixtureSource::fetch_feature_texts(const FeatureKey& key, std::size_t max_texts) {
  std::lock_guard lock(mutex_);
  if (!texts_) index_texts();
  auto it = texts_->find(key);
  if (it == texts_->end()) {
    throw Error(ErrorKind::not_found, "no stored texts for feature " + key.target.label() + "@" +
                                          std::to_string(key.layer) + "/" + std::to_string(key.index));
  }
  std::vector<std::string> texts = it->second;
  if (texts.size() > max_texts) texts.resize(max_texts);
  return texts;
}

// ---- cache ----------------------------------------------------------------------

CachedSource::CachedSource(std::shared_ptr<ActivationSource> inner, fs::path cache_dir, WarningSink warn)
    : inner_(std::move(inner)), dir_(std::move(cache_dir)), warn_(std::move(warn)) {
  fs::create_directories(dir_);
}

ActivationRecord CachedSource::fetch_top_features(const SaeTarget& target, const Prompt& prompt, std::size_t k) {
  const CacheKey key{target.id(), prompt.text, k};
  const fs::path path = cache_entry_path(dir_, key);
  if (fs::exists(path)) {
    try {
      CacheEntry entry = parse_cache_entry(read_file(path));
      check_entry_matches(entry, key);
      ++hits_;
      entry.record.provenance = Provenance::cache;
      return entry.record;
    } catch (const Error& e) {
      warn_("discarding corrupt cache entry " + path.string() + ": " + e.what());
    }
  }
  ++misses_;
  ActivationRecord record = inner_->fetch_top_features(target, prompt, k);
  const std::string document = serialize_cache_entry(key, record);
  {
    std::lock_guard lock(write_mutex_);
    write_file_atomic(path, document);
  }
  return record;
}

std::vector<std::string> CachedSource::fetch_feature_texts(const FeatureKey& key, std::size_t max_texts) {
  return inner_->fetch_feature_texts(key, max_texts);
}

std::shared_ptr<ActivationSource> cached(std::shared_ptr<ActivationSource> inner, const fs::path& cache_dir,
                                         WarningSink warn) {
  return std::make_shared<CachedSource>(std::move(inner), cache_dir, std::move(warn));
}

}  // namespace saeprobe
