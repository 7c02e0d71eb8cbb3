#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "twincheck/binning.hpp"
#include "twincheck/schema.hpp"
#include "twincheck/trajectory.hpp"

namespace twincheck {

/// One generated twin trajectory (X0, Xhat_1, ..., Xhat_t).
struct TwinRecord {
  std::vector<double> x0;
  std::vector<std::vector<double>> steps;
};

/// Dataset D_hat(a_{1:t}): every record generated under the tagged actions.
struct TwinDataset {
  std::vector<int> actions;  // a_{1:t} tag
  FeatureSchema schema;
  std::vector<TwinRecord> records;
  std::string twin_id;
  std::uint64_t seed = 0;
  std::vector<long> failed_sessions;  // session indices that failed (external twins)
};

/// Session contract: init once, then one step per action. Sessions are
/// independent across instances.
class TwinSession {
 public:
  virtual ~TwinSession() = default;
  virtual void init(std::span<const double> x0) = 0;
  /// raw carries representative dose values for twins that consume raw doses;
  /// empty for index-native twins.
  virtual std::vector<double> step(int action, std::span<const double> raw) = 0;
  virtual void reset() = 0;
};

class TwinFactory {
 public:
  virtual ~TwinFactory() = default;
  virtual std::unique_ptr<TwinSession> make_session(std::uint64_t seed) = 0;
  virtual std::string id() const = 0;
};

struct TwinGenOptions {
  const ActionBinning* binning = nullptr;  // supplies raw doses when set
  bool keep_going_on_failure = false;      // record failed sessions instead of throwing
  int parallelism = 1;                     // worker threads; results ordered by session index
};

/// Draws m initial states X0 without replacement from d and rolls one session
/// per draw under the given actions. Deterministic given (d, actions, m, seed)
/// for built-in twins.
TwinDataset generate_twin_dataset(const TrajectoryDataset& d, std::vector<int> actions,
                                  TwinFactory& twin, long m, std::uint64_t seed,
                                  const TwinGenOptions& opts = {});

/// Header line with the action tag and metadata, then one record per line.
void save_twin_dataset(const TwinDataset& d, const std::string& path);
TwinDataset load_twin_dataset(const std::string& path, const FeatureSchema& schema);

}  // namespace twincheck
