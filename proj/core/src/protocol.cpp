#include "twincheck/protocol.hpp"

#include <algorithm>

#include "json.hpp"
#include "twincheck/errors.hpp"

namespace twincheck {

namespace {

nlohmann::json parse_frame(const std::string& line) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    // e.byte is the offset at which parsing failed (1-based).
    throw ProtocolError("malformed frame at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

void require_keys(const nlohmann::json& j, std::initializer_list<const char*> required,
                  std::initializer_list<const char*> optional = {}) {
  if (!j.is_object()) throw ProtocolError("frame is not a JSON object");
  for (const char* k : required)
    if (!j.contains(k)) throw ProtocolError(std::string("frame is missing field \"") + k + "\"");
  for (const auto& [key, _] : j.items()) {
    const auto known = [&](std::initializer_list<const char*> set) {
      return std::any_of(set.begin(), set.end(), [&](const char* k) { return key == k; });
    };
    if (!known(required) && !known(optional))
      throw ProtocolError("frame has unknown field \"" + key + "\"");
  }
}

std::vector<double> number_vector(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) throw ProtocolError(std::string("field \"") + field + "\" must be an array");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) throw ProtocolError(std::string("field \"") + field + "\" must be numeric");
    v.push_back(e.get<double>());
  }
  return v;
}

}  // namespace

std::string encode_request(const Request& r) {
  nlohmann::json j;
  if (const auto* init = std::get_if<InitRequest>(&r)) {
    j = {{"cmd", "init"}, {"x0", init->x0}};
  } else if (const auto* step = std::get_if<StepRequest>(&r)) {
    j = {{"cmd", "step"}, {"a", step->a}};
    if (step->raw.has_value()) j["raw"] = *step->raw;
  } else {
    j = {{"cmd", "reset"}};
  }
  return j.dump();
}

Request decode_request(const std::string& line) {
  const auto j = parse_frame(line);
  if (!j.is_object() || !j.contains("cmd") || !j.at("cmd").is_string())
    throw ProtocolError("request frame needs a string \"cmd\" field");
  const std::string cmd = j.at("cmd").get<std::string>();
  if (cmd == "init") {
    require_keys(j, {"cmd", "x0"});
    return InitRequest{number_vector(j.at("x0"), "x0")};
  }
  if (cmd == "step") {
    require_keys(j, {"cmd", "a"}, {"raw"});
    if (!j.at("a").is_number_integer()) throw ProtocolError("field \"a\" must be an integer");
    StepRequest s;
    s.a = j.at("a").get<int>();
    if (j.contains("raw")) s.raw = number_vector(j.at("raw"), "raw");
    return s;
  }
  if (cmd == "reset") {
    require_keys(j, {"cmd"});
    return ResetRequest{};
  }
  throw ProtocolError("unknown command \"" + cmd + "\"");
}

std::string encode_response(const Response& r) {
  nlohmann::json j;
  if (std::holds_alternative<OkResponse>(r)) {
    j = {{"ok", true}};
  } else if (const auto* obs = std::get_if<ObservationResponse>(&r)) {
    j = {{"x", obs->x}};
  } else {
    j = {{"error", std::get<ErrorResponse>(r).message}};
  }
  return j.dump();
}

Response decode_response(const std::string& line) {
  const auto j = parse_frame(line);
  if (!j.is_object()) throw ProtocolError("response frame is not a JSON object");
  if (j.contains("error")) {
    require_keys(j, {"error"});
    if (!j.at("error").is_string()) throw ProtocolError("field \"error\" must be a string");
    return ErrorResponse{j.at("error").get<std::string>()};
  }
  if (j.contains("x")) {
    require_keys(j, {"x"});
    return ObservationResponse{number_vector(j.at("x"), "x")};
  }
  if (j.contains("ok")) {
    require_keys(j, {"ok"});
    if (!j.at("ok").is_boolean() || !j.at("ok").get<bool>())
      throw ProtocolError("field \"ok\" must be true");
    return OkResponse{};
  }
  throw ProtocolError("response frame must carry \"ok\", \"x\", or \"error\"");
}

}  // namespace twincheck
