#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace twincheck {

/// Wire frames for external twins: newline-delimited JSON over stdin/stdout,
/// one frame per line, UTF-8.

struct InitRequest {
  std::vector<double> x0;
  bool operator==(const InitRequest&) const = default;
};

struct StepRequest {
  int a = 0;
  std::optional<std::vector<double>> raw;  // representative doses, when binned
  bool operator==(const StepRequest&) const = default;
};

struct ResetRequest {
  bool operator==(const ResetRequest&) const = default;
};

using Request = std::variant<InitRequest, StepRequest, ResetRequest>;

struct OkResponse {
  bool operator==(const OkResponse&) const = default;
};

struct ObservationResponse {
  std::vector<double> x;
  bool operator==(const ObservationResponse&) const = default;
};

struct ErrorResponse {
  std::string message;
  bool operator==(const ErrorResponse&) const = default;
};

using Response = std::variant<OkResponse, ObservationResponse, ErrorResponse>;

/// Single line, no trailing newline. decode_* throw ProtocolError on malformed
/// frames (naming the byte offset), unknown commands, or unknown fields.
std::string encode_request(const Request& r);
Request decode_request(const std::string& line);
std::string encode_response(const Response& r);
Response decode_response(const std::string& line);

}  // namespace twincheck
