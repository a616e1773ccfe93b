#pragma once

#include <chrono>
#include <map>
#include <set>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "saeprobe/activation.hpp"

namespace saeprobe {

inline constexpr const char* kApiKeyEnvVar = "NEURONPEDIA_API_KEY";

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::multimap<std::string, std::string>;

// Throws Error{transport} when no response arrives at all.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse get(const std::string& url, const HttpHeaders& headers) = 0;
  virtual HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers) = 0;
};

// cpp-httplib backed transport; `base_url` is scheme://host[:port].
std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url, std::chrono::seconds timeout);

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_until(time_point when) = 0;
};

Clock& steady_clock();

// Spaces request starts at least 1/rps apart, so any half-open one-second
// window holds at most ceil(rps) starts.
class RateLimiter {
 public:
  RateLimiter(double requests_per_second, Clock& clock);

  // Blocks until a start slot is free and claims it. Returns the slot time.
  Clock::time_point acquire();

 private:
  std::mutex mutex_;
  Clock& clock_;
  std::chrono::nanoseconds interval_;
  Clock::time_point next_{};
  bool started_ = false;
};

// Wire specifics for the activation API. Placeholders in path templates:
// {model_id}, {source_set}, {layer}, {index}; {layer_id} is the backend's
// layer identifier, rendered from layer_id_template.
struct ApiAdapterConfig {
  std::string base_url = "https://www.neuronpedia.org";
  std::string search_path = "/api/search-all";
  std::string feature_path = "/api/feature/{model_id}/{layer_id}/{index}";
  std::string layer_id_template = "{layer}-{source_set}";
  std::string api_key_header = "x-api-key";

  // search request body fields
  std::string request_model_field = "modelId";
  std::string request_source_set_field = "sourceSet";
  std::string request_text_field = "text";
  std::string request_count_field = "numResults";

  // search response fields
  std::string results_field = "result";
  std::string layer_field = "layer";
  std::string index_field = "index";
  std::string value_field = "maxValue";

  // feature response fields
  std::string activations_field = "activations";
  std::string tokens_field = "tokens";
};

struct LiveSourceConfig {
  ApiAdapterConfig adapter;
  std::string api_key;
  double rate_limit_rps = 1.0;
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  std::size_t texts_per_feature = 20;
};

class LiveSource final : public ActivationSource {
 public:
  LiveSource(LiveSourceConfig config, TargetRegistry registry, std::shared_ptr<HttpTransport> transport,
             Clock& clock = steady_clock());

  ActivationRecord fetch_top_features(const SaeTarget& target, const Prompt& prompt, std::size_t k) override;
  std::vector<std::string> fetch_feature_texts(const FeatureKey& key, std::size_t max_texts) override;

  std::size_t requests_sent() const;

 private:
  HttpResponse send(const std::string& method, const std::string& path, const std::string& body);
  std::string feature_path(const FeatureKey& key) const;

  LiveSourceConfig config_;
  TargetRegistry registry_;
  std::shared_ptr<HttpTransport> transport_;
  Clock& clock_;
  RateLimiter limiter_;
  mutable std::mutex mutex_;
  std::size_t requests_ = 0;
  std::map<FeatureKey, std::vector<std::string>> texts_;
  std::set<FeatureKey> exhausted_;  // server returned everything it has
};

}  // namespace saeprobe
