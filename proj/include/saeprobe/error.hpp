#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace saeprobe {

enum class ErrorKind {
  usage,
  schema,
  checksum,
  conflict,
  validation,
  template_syntax,
  configuration,
  undefined_metric,
  transport,
  protocol,
  not_found,
  missing_data,
};

std::string_view to_string(ErrorKind kind);

// Process exit code for an error kind.
//   0 success, 1 unexpected failure, 2 usage, 3 transport/protocol,
//   4 missing data, 5 schema/checksum, 6 validation/configuration.
int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  bool retryable() const noexcept { return kind_ == ErrorKind::transport; }

 private:
  ErrorKind kind_;
};

// Malformed backend response. Keeps the raw payload for debugging.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& message, std::string raw_payload);

  const std::string& raw_payload() const noexcept { return raw_payload_; }

 private:
  std::string raw_payload_;
};

}  // namespace saeprobe
