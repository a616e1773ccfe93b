#include "saeprobe/error.hpp"

namespace saeprobe {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::schema: return "schema";
    case ErrorKind::checksum: return "checksum";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::validation: return "validation";
    case ErrorKind::template_syntax: return "template";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::undefined_metric: return "undefined-metric";
    case ErrorKind::transport: return "transport";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::not_found: return "not-found";
    case ErrorKind::missing_data: return "missing-data";
  }
  return "unknown";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return 2;
    case ErrorKind::transport:
    case ErrorKind::protocol: return 3;
    case ErrorKind::not_found:
    case ErrorKind::missing_data: return 4;
    case ErrorKind::schema:
    case ErrorKind::checksum: return 5;
    case ErrorKind::conflict:
    case ErrorKind::validation:
    case ErrorKind::template_syntax:
    case ErrorKind::configuration:
    case ErrorKind::undefined_metric: return 6;
  }
  return 1;
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

ProtocolError::ProtocolError(const std::string& message, std::string raw_payload)
    : Error(ErrorKind::protocol, message), raw_payload_(std::move(raw_payload)) {}

}  // namespace saeprobe
