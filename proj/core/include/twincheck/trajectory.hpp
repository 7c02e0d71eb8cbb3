#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "twincheck/schema.hpp"

namespace twincheck {

struct TrajectoryStep {
  int action = 0;
  std::vector<double> x;
};

/// One record X0, A1, X1, ..., AT, XT.
struct ObservationalTrajectory {
  std::vector<double> x0;
  std::vector<TrajectoryStep> steps;
};

/// Immutable after construction; records are treated as i.i.d. draws.
struct TrajectoryDataset {
  FeatureSchema schema;
  std::vector<ObservationalTrajectory> records;
  std::string provenance;

  std::size_t size() const { return records.size(); }
};

/// Throws ValidationError naming the record index on any mismatch.
void validate_record(const FeatureSchema& schema, const ObservationalTrajectory& t,
                     std::size_t index);

nlohmann::json trajectory_to_json(const ObservationalTrajectory& t);
ObservationalTrajectory trajectory_from_json(const nlohmann::json& j);

/// Newline-delimited JSON, one trajectory per line. Empty file -> empty dataset.
TrajectoryDataset load_dataset(const std::string& path, const FeatureSchema& schema);
void save_dataset(const TrajectoryDataset& d, const std::string& path);

/// Seeded disjoint partition; |first| = round(fraction * |d|).
std::pair<TrajectoryDataset, TrajectoryDataset> split_dataset(const TrajectoryDataset& d,
                                                              double held_out_fraction,
                                                              std::uint64_t seed);

}  // namespace twincheck
