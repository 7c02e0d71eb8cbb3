#pragma once

#include <string>
#include <vector>

#include "twincheck/hypothesis.hpp"
#include "twincheck/trajectory.hpp"

namespace twincheck {

/// Hypothesis-set recipe. Conditioning cells are the cross product of the sex
/// value, the age quartile bin, and a below/above-median split of the target
/// quantity at every conditioning step; only cells with at least one
/// supporting trajectory are emitted. Empty sex/age feature names disable
/// those factors.
struct GenerationConfig {
  std::vector<std::string> quantities;  // step features to assess
  double q_lo = 0.2;                    // outcome-bound quantiles over the support
  double q_up = 0.8;
  std::string sex_feature;  // x0 feature, categorical factor
  std::string age_feature;  // x0 feature, quartile factor
  bool pooled_median = false;  // one median across steps instead of per-step
  // The median split constrains the quantity at step t too, which collapses
  // the outcome quantiles on binary quantities; turn it off for those.
  bool median_split = true;
};

/// Deterministic given (d0, cfg). Degenerate specs (y_lo == y_up) are kept;
/// the tester skips them with an uninformative status.
std::vector<HypothesisSpec> generate_hypotheses(const TrajectoryDataset& d0,
                                                const GenerationConfig& cfg);

}  // namespace twincheck
