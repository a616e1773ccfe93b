#include "saeprobe/activation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "saeprobe/error.hpp"

namespace saeprobe {

using nlohmann::json;

std::string_view to_string(HookKind kind) {
  return kind == HookKind::residual ? "residual" : "attention";
}

HookKind hook_kind_from_string(std::string_view name) {
  if (name == "residual") return HookKind::residual;
  if (name == "attention") return HookKind::attention;
  throw Error(ErrorKind::schema, "unknown hook kind '" + std::string(name) + "'");
}

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::live: return "live";
    case Provenance::cache: return "cache";
    case Provenance::synthetic: return "synthetic";
  }
  return "synthetic";
}

Provenance provenance_from_string(std::string_view name) {
  if (name == "live") return Provenance::live;
  if (name == "cache") return Provenance::cache;
  if (name == "synthetic") return Provenance::synthetic;
  throw Error(ErrorKind::schema, "unknown provenance '" + std::string(name) + "'");
}

// ---- registry ---------------------------------------------------------------

TargetRegistry::TargetRegistry(std::vector<SaeTarget> targets) {
  for (auto& target : targets) add(std::move(target));
}

void TargetRegistry::add(SaeTarget target) {
  if (target.feature_count == 0) {
    throw Error(ErrorKind::validation, "target " + target.label() + " has zero features");
  }
  if (find(target.id()) != nullptr) {
    throw Error(ErrorKind::conflict, "target " + target.label() + " is registered twice");
  }
  targets_.push_back(std::move(target));
}

const SaeTarget* TargetRegistry::find(const TargetId& id) const {
  auto it = std::find_if(targets_.begin(), targets_.end(),
                         [&](const SaeTarget& t) { return t.id() == id; });
  return it == targets_.end() ? nullptr : &*it;
}

const SaeTarget& TargetRegistry::require(const TargetId& id) const {
  if (const SaeTarget* target = find(id)) return *target;
  throw Error(ErrorKind::configuration, "unknown SAE target " + id.label());
}

std::vector<SaeTarget> TargetRegistry::select(std::string_view selector) const {
  if (selector == "all") return targets_;
  std::vector<SaeTarget> out;
  if (auto slash = selector.find('/'); slash != std::string_view::npos) {
    out.push_back(require({std::string(selector.substr(0, slash)), std::string(selector.substr(slash + 1))}));
    return out;
  }
  for (const auto& target : targets_) {
    if (target.model_id == selector) out.push_back(target);
  }
  if (out.empty()) {
    throw Error(ErrorKind::configuration, "no SAE target matches '" + std::string(selector) + "'");
  }
  return out;
}

TargetRegistry TargetRegistry::parse(std::string_view document) {
  json root;
  try {
    root = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::schema, std::string("target registry is not valid JSON: ") + e.what());
  }
  if (!root.contains("targets") || !root["targets"].is_array()) {
    throw Error(ErrorKind::schema, "target registry needs a top-level 'targets' array");
  }
  TargetRegistry registry;
  for (const json& entry : root["targets"]) registry.add(target_from_json(entry));
  return registry;
}

TargetRegistry TargetRegistry::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::configuration, "cannot open target registry " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

// ---- records ----------------------------------------------------------------

double quantize_activation(double value) {
  if (!std::isfinite(value) || value == 0.0) return value;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return std::strtod(buf, nullptr);
}

namespace {

bool ranks_before(const FeatureActivation& a, const FeatureActivation& b) {
  if (a.activation_value != b.activation_value) return a.activation_value > b.activation_value;
  return std::tie(a.key.layer, a.key.index) < std::tie(b.key.layer, b.key.index);
}

}  // namespace

void canonicalize(ActivationRecord& record, std::optional<std::size_t> k) {
  const TargetId owner = record.target.id();
  std::set<FeatureKey> seen;
  for (auto& feature : record.features) {
    if (!(feature.activation_value >= 0.0) || !std::isfinite(feature.activation_value)) {
      throw Error(ErrorKind::validation, "negative or non-finite activation value");
    }
    if (feature.key.target != owner) {
      throw Error(ErrorKind::validation,
                  "feature of " + feature.key.target.label() + " inside a record for " + owner.label());
    }
    if (feature.key.index >= record.target.feature_count) {
      throw Error(ErrorKind::validation, "feature index " + std::to_string(feature.key.index) +
                                             " is outside " + owner.label());
    }
    if (!seen.insert(feature.key).second) {
      throw Error(ErrorKind::validation, "duplicate feature " + std::to_string(feature.key.layer) + "/" +
                                             std::to_string(feature.key.index) + " in one record");
    }
    feature.activation_value = quantize_activation(feature.activation_value);
  }
  std::sort(record.features.begin(), record.features.end(), ranks_before);
  if (k && record.features.size() > *k) record.features.resize(*k);
}

bool satisfies_ordering(const ActivationRecord& record) {
  for (std::size_t i = 1; i < record.features.size(); ++i) {
    if (!ranks_before(record.features[i - 1], record.features[i])) return false;
  }
  std::set<FeatureKey> keys;
  for (const auto& f : record.features) {
    if (!keys.insert(f.key).second) return false;
  }
  return true;
}

json to_json(const SaeTarget& target) {
  return {{"model_id", target.model_id},
          {"source_set", target.source_set},
          {"feature_count", target.feature_count},
          {"hook_kind", std::string(to_string(target.hook_kind))},
          {"short_name", target.short_name}};
}

namespace {

template <typename T>
T field(const json& obj, const char* name, const char* context) {
  auto it = obj.find(name);
  if (it == obj.end()) {
    throw Error(ErrorKind::schema, std::string(context) + " is missing '" + name + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::schema, std::string(context) + "." + name + " has the wrong type");
  }
}

}  // namespace

SaeTarget target_from_json(const json& value) {
  if (!value.is_object()) throw Error(ErrorKind::schema, "target must be an object");
  SaeTarget target;
  target.model_id = field<std::string>(value, "model_id", "target");
  target.source_set = field<std::string>(value, "source_set", "target");
  target.feature_count = field<std::uint32_t>(value, "feature_count", "target");
  target.hook_kind = hook_kind_from_string(field<std::string>(value, "hook_kind", "target"));
  target.short_name = value.value("short_name", target.model_id);
  return target;
}

json to_json(const ActivationRecord& record) {
  json features = json::array();
  for (const auto& f : record.features) {
    features.push_back({{"layer", f.key.layer},
                        {"feature_index", f.key.index},
                        {"activation_value", f.activation_value},
                        {"top_texts", f.top_texts}});
  }
  return {{"prompt",
           {{"category_id", record.prompt.category_id},
            {"term", record.prompt.term},
            {"text", record.prompt.text}}},
          {"target", to_json(record.target)},
          {"features", std::move(features)},
          {"retrieved_at", record.retrieved_at},
          {"provenance", std::string(to_string(record.provenance))}};
}

ActivationRecord record_from_json(const json& value) {
  if (!value.is_object()) throw Error(ErrorKind::schema, "record must be an object");
  ActivationRecord record;
  const json prompt = field<json>(value, "prompt", "record");
  record.prompt.category_id = field<std::string>(prompt, "category_id", "prompt");
  record.prompt.term = field<std::string>(prompt, "term", "prompt");
  record.prompt.text = field<std::string>(prompt, "text", "prompt");
  record.target = target_from_json(field<json>(value, "target", "record"));
  record.retrieved_at = field<std::string>(value, "retrieved_at", "record");
  record.provenance = provenance_from_string(field<std::string>(value, "provenance", "record"));
  const json features = field<json>(value, "features", "record");
  if (!features.is_array()) throw Error(ErrorKind::schema, "record.features must be an array");
  for (const json& f : features) {
    FeatureActivation feature;
    feature.key.target = record.target.id();
    feature.key.layer = field<std::uint32_t>(f, "layer", "feature");
    feature.key.index = field<std::uint32_t>(f, "feature_index", "feature");
    feature.activation_value = field<double>(f, "activation_value", "feature");
    feature.top_texts = field<std::vector<std::string>>(f, "top_texts", "feature");
    record.features.push_back(std::move(feature));
  }
  return record;
}

std::string canonical_dump(const json& value) {
  return value.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

std::string utc_timestamp_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace saeprobe
