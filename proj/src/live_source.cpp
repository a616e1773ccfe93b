#include "saeprobe/live_source.hpp"

#include <cctype>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "saeprobe/error.hpp"

namespace saeprobe {

using nlohmann::json;

namespace {

class SteadyClock final : public Clock {
 public:
  time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_until(time_point when) override { std::this_thread::sleep_until(when); }
};

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  for (std::size_t pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
  return text;
}

std::uint32_t parse_layer(const json& value, const std::string& raw) {
  if (value.is_number_unsigned()) return value.get<std::uint32_t>();
  if (value.is_string()) {
    const std::string s = value.get<std::string>();
    std::size_t digits = 0;
    while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
    if (digits > 0) return static_cast<std::uint32_t>(std::stoul(s.substr(0, digits)));
  }
  throw ProtocolError("unparseable layer " + value.dump(), raw);
}

std::uint32_t parse_index(const json& value, const std::string& raw) {
  try {
    if (value.is_number_unsigned()) return value.get<std::uint32_t>();
    if (value.is_string()) return static_cast<std::uint32_t>(std::stoul(value.get<std::string>()));
  } catch (const std::exception&) {
  }
  throw ProtocolError("unparseable feature index " + value.dump(), raw);
}

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("response is not valid JSON: ") + e.what(), body);
  }
}

}  // namespace

Clock& steady_clock() {
  static SteadyClock clock;
  return clock;
}

RateLimiter::RateLimiter(double requests_per_second, Clock& clock) : clock_(clock) {
  if (!(requests_per_second > 0.0) || !std::isfinite(requests_per_second)) {
    throw Error(ErrorKind::configuration, "rate limit must be a positive number of requests per second");
  }
  interval_ = std::chrono::nanoseconds(static_cast<std::int64_t>(std::ceil(1e9 / requests_per_second)));
}

Clock::time_point RateLimiter::acquire() {
  std::lock_guard lock(mutex_);
  Clock::time_point now = clock_.now();
  if (started_ && now < next_) {
    clock_.sleep_until(next_);
    now = clock_.now();
    if (now < next_) now = next_;
  }
  started_ = true;
  next_ = now + interval_;
  return now;
}

LiveSource::LiveSource(LiveSourceConfig config, TargetRegistry registry, std::shared_ptr<HttpTransport> transport,
                       Clock& clock)
    : config_(std::move(config)),
      registry_(std::move(registry)),
      transport_(std::move(transport)),
      clock_(clock),
      limiter_(config_.rate_limit_rps, clock) {
  if (config_.api_key.empty()) {
    throw Error(ErrorKind::configuration, std::string("live backend needs an API key in ") + kApiKeyEnvVar);
  }
}

std::size_t LiveSource::requests_sent() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

HttpResponse LiveSource::send(const std::string& method, const std::string& path, const std::string& body) {
  const std::string url = config_.adapter.base_url + path;
  const HttpHeaders headers = {{config_.adapter.api_key_header, config_.api_key},
                               {"Content-Type", "application/json"},
                               {"Accept", "application/json"}};
  std::string last_failure;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      clock_.sleep_until(clock_.now() + config_.backoff_base * (1LL << (attempt - 1)));
    }
    limiter_.acquire();
    {
      std::lock_guard lock(mutex_);
      ++requests_;
    }
    HttpResponse response;
    try {
      response = method == "GET" ? transport_->get(url, headers) : transport_->post(url, body, headers);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::transport) throw;
      last_failure = e.what();
      continue;
    }
    if (response.status >= 200 && response.status < 300) return response;
    if (response.status == 429 || response.status >= 500) {
      last_failure = "HTTP " + std::to_string(response.status) + " from " + url;
      continue;
    }
    if (response.status == 404) throw Error(ErrorKind::not_found, "HTTP 404 from " + url);
    if (response.status == 401 || response.status == 403) {
      throw Error(ErrorKind::configuration, "HTTP " + std::to_string(response.status) + " from " + url +
                                                " (check " + kApiKeyEnvVar + ")");
    }
    throw ProtocolError("unexpected HTTP " + std::to_string(response.status) + " from " + url, response.body);
  }
  throw Error(ErrorKind::transport, "giving up after " + std::to_string(config_.max_retries + 1) +
                                        " attempts: " + last_failure);
}

std::string LiveSource::feature_path(const FeatureKey& key) const {
  std::string layer_id = replace_all(config_.adapter.layer_id_template, "{layer}", std::to_string(key.layer));
  layer_id = replace_all(layer_id, "{source_set}", key.target.source_set);
  std::string path = replace_all(config_.adapter.feature_path, "{model_id}", key.target.model_id);
  path = replace_all(path, "{source_set}", key.target.source_set);
  path = replace_all(path, "{layer_id}", layer_id);
  path = replace_all(path, "{layer}", std::to_string(key.layer));
  return replace_all(path, "{index}", std::to_string(key.index));
}

ActivationRecord LiveSource::fetch_top_features(const SaeTarget& target, const Prompt& prompt, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::validation, "k must be at least 1");
  const SaeTarget& known = registry_.require(target.id());
  const ApiAdapterConfig& a = config_.adapter;

  json request = {{a.request_model_field, known.model_id},
                  {a.request_source_set_field, known.source_set},
                  {a.request_text_field, prompt.text},
                  {a.request_count_field, k},
                  {"selectedLayers", json::array()},
                  {"sortIndexes", json::array()},
                  {"ignoreBos", true},
                  {"densityThreshold", -1}};
  const HttpResponse response = send("POST", a.search_path, request.dump());
  const json body = parse_body(response.body);
  if (!body.is_object() || !body.contains(a.results_field) || !body[a.results_field].is_array()) {
    throw ProtocolError("search response lacks a '" + a.results_field + "' array", response.body);
  }

  ActivationRecord record;
  record.prompt = prompt;
  record.target = known;
  record.provenance = Provenance::live;
  record.retrieved_at = utc_timestamp_now();
  std::map<FeatureKey, double> best;
  for (const json& item : body[a.results_field]) {
    if (!item.is_object() || !item.contains(a.layer_field) || !item.contains(a.index_field) ||
        !item.contains(a.value_field) || !item[a.value_field].is_number()) {
      throw ProtocolError("search result item lacks layer/index/value", response.body);
    }
    const double value = item[a.value_field].get<double>();
    if (!(value > 0.0)) continue;
    const FeatureKey key{known.id(), parse_layer(item[a.layer_field], response.body),
                         parse_index(item[a.index_field], response.body)};
    auto [it, inserted] = best.try_emplace(key, value);
    if (!inserted) it->second = std::max(it->second, value);
  }
  for (const auto& [key, value] : best) record.features.push_back({key, value, {}});
  try {
    canonicalize(record, k);
  } catch (const Error& e) {
    throw ProtocolError(std::string("search response violates record invariants: ") + e.what(), response.body);
  }
  for (auto& feature : record.features) {
    feature.top_texts = fetch_feature_texts(feature.key, config_.texts_per_feature);
  }
  return record;
}

std::vector<std::string> LiveSource::fetch_feature_texts(const FeatureKey& key, std::size_t max_texts) {
  const SaeTarget& target = registry_.require(key.target);
  if (key.index >= target.feature_count) {
    throw Error(ErrorKind::not_found, "feature index beyond " + target.label());
  }
  {
    std::lock_guard lock(mutex_);
    if (auto it = texts_.find(key); it != texts_.end()) {
      if (it->second.size() >= max_texts) {
        return {it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(max_texts)};
      }
      if (exhausted_.contains(key)) return it->second;
    }
  }
  const ApiAdapterConfig& a = config_.adapter;
  const HttpResponse response = send("GET", feature_path(key), "");
  const json body = parse_body(response.body);
  if (!body.is_object() || !body.contains(a.activations_field) || !body[a.activations_field].is_array()) {
    throw ProtocolError("feature response lacks an '" + a.activations_field + "' array", response.body);
  }
  std::vector<std::string> texts;
  const bool exhausted = body[a.activations_field].size() < max_texts;
  for (const json& activation : body[a.activations_field]) {
    if (texts.size() >= max_texts) break;
    if (!activation.is_object() || !activation.contains(a.tokens_field) || !activation[a.tokens_field].is_array()) {
      throw ProtocolError("activation entry lacks '" + a.tokens_field + "'", response.body);
    }
    std::string text;
    for (const json& token : activation[a.tokens_field]) {
      if (!token.is_string()) throw ProtocolError("non-string token", response.body);
      text += token.get<std::string>();
    }
    texts.push_back(std::move(text));
  }
  std::lock_guard lock(mutex_);
  texts_[key] = texts;
  if (exhausted) exhausted_.insert(key);
  return texts;
}

}  // namespace saeprobe
