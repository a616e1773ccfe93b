#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "saeprobe/error.hpp"
#include "saeprobe/live_source.hpp"

namespace saeprobe {

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  HttplibTransport(const std::string& base_url, std::chrono::seconds timeout) : base_url_(base_url) {
    client_ = std::make_unique<httplib::Client>(base_url);
    client_->set_connection_timeout(timeout);
    client_->set_read_timeout(timeout);
    client_->set_write_timeout(timeout);
    client_->set_follow_location(true);
  }

  HttpResponse get(const std::string& url, const HttpHeaders& headers) override {
    std::lock_guard lock(mutex_);
    return convert(client_->Get(path_of(url), to_headers(headers)), url);
  }

  HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers) override {
    std::lock_guard lock(mutex_);
    return convert(client_->Post(path_of(url), to_headers(headers), body, "application/json"), url);
  }

 private:
  std::string path_of(const std::string& url) const {
    if (url.rfind(base_url_, 0) == 0) return url.substr(base_url_.size());
    return url;
  }

  static httplib::Headers to_headers(const HttpHeaders& headers) {
    httplib::Headers out;
    for (const auto& [name, value] : headers) {
      if (name != "Content-Type") out.emplace(name, value);
    }
    return out;
  }

  static HttpResponse convert(const httplib::Result& result, const std::string& url) {
    if (!result) {
      throw Error(ErrorKind::transport, "request to " + url + " failed: " + httplib::to_string(result.error()));
    }
    return {result->status, result->body};
  }

  std::string base_url_;
  std::mutex mutex_;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url, std::chrono::seconds timeout) {
  return std::make_unique<HttplibTransport>(base_url, timeout);
}

}  // namespace saeprobe
