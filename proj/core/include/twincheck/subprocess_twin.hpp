#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "twincheck/twin.hpp"

namespace twincheck {

struct SubprocessTwinOptions {
  std::vector<std::string> argv;  // command and arguments
  double timeout_seconds = 30.0;  // per protocol exchange
};

/// Runs external twins over the line protocol. Worker processes are pooled and
/// reused across sessions (a reset frame separates trajectories); a process
/// that violates the protocol or times out is killed and replaced, failing
/// only the session it was serving.
class SubprocessTwinFactory : public TwinFactory {
 public:
  explicit SubprocessTwinFactory(SubprocessTwinOptions opts);
  ~SubprocessTwinFactory() override;

  std::unique_ptr<TwinSession> make_session(std::uint64_t seed) override;
  std::string id() const override;

  /// Processes spawned over the factory's lifetime (restarts included).
  long processes_spawned() const;

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace twincheck
