#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "twincheck/trajectory.hpp"

namespace twincheck {

/// Five bins per raw dose dimension: bin 0 is dose exactly zero, bins 1-4 are
/// delimited by the quartiles of the strictly positive doses.
struct DoseBinning {
  std::string column;
  std::vector<double> edges;            // 3 interior edges, strictly increasing
  std::vector<double> representatives;  // 5 per-bin median doses
};

struct ActionBinning {
  std::vector<DoseBinning> dims;

  int num_actions() const;  // product of 5 per dimension
};

/// Fits the binning on held-out data; throws StageError if a dimension has no
/// strictly positive doses.
ActionBinning fit_action_binning(const TrajectoryDataset& d0,
                                 const std::vector<std::string>& raw_dose_columns);

/// Bin index in [0,5) for one dimension; dose 0 always maps to bin 0.
int dose_bin(const DoseBinning& b, double dose);

/// Row-major combined action index over all dimensions.
int action_index(const ActionBinning& b, std::span<const double> doses);

/// Median doses representing a combined action index.
std::vector<double> representative_doses(const ActionBinning& b, int action);

/// Rewrites each step's action to the binned index of its raw dose columns.
/// The returned schema carries the combined cardinality at every step.
TrajectoryDataset apply_action_binning(const TrajectoryDataset& d, const ActionBinning& b);

nlohmann::json binning_to_json(const ActionBinning& b);
ActionBinning binning_from_json(const nlohmann::json& j);

}  // namespace twincheck
