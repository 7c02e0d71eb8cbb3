#pragma once

#include <stdexcept>
#include <string>

namespace twincheck {

/// Bad inputs: malformed files, schema violations, out-of-range parameters.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A pipeline stage failed after its inputs validated.
class StageError : public std::runtime_error {
 public:
  explicit StageError(const std::string& what) : std::runtime_error(what) {}
};

/// Wire-protocol violation when talking to an external twin.
class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace twincheck
