#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "twincheck/hypothesis.hpp"
#include "twincheck/trajectory.hpp"
#include "twincheck/twin.hpp"

namespace twincheck {

/// Sample quantities over the qualifying observational subset
/// {X_{0:N}(A_{1:N}) in B_{0:N}}.
struct BoundSummary {
  long n = 0;
  double mu_lo = 0.0;
  double mu_up = 0.0;
  double propensity_hat = 0.0;  // fraction of the subset with A_{1:t} = a_{1:t}
  double tightness_hat = 0.0;   // (mu_up - mu_lo) / (y_up - y_lo), 0 when range is 0

  bool empty() const { return n == 0; }
};

/// Twin-side analogue over trajectories with (X0, Xhat_{1:t}) in B_{0:t}.
struct TwinSummary {
  long n_hat = 0;
  double mu_hat = 0.0;

  bool empty() const { return n_hat == 0; }
};

/// Largest s with A_{1:s} = a_{1:s}; 0 on first-step disagreement.
int last_agreement_index(std::span<const int> taken, std::span<const int> target);

/// (Y_lo, Y_up) for a qualifying trajectory, absent otherwise. Qualification
/// checks region membership only along the observed prefix X_{0:N}.
std::optional<std::pair<double, double>> transformed_outcomes(const ObservationalTrajectory& traj,
                                                              const HypothesisSpec& spec,
                                                              const FeatureSchema& schema);

/// The per-trajectory samples behind a BoundSummary; y_lo/y_up are aligned.
struct QualifyingSamples {
  std::vector<double> y_lo;
  std::vector<double> y_up;
  long agree_count = 0;
};

QualifyingSamples qualifying_samples(const TrajectoryDataset& d, const HypothesisSpec& spec);

BoundSummary summarize_observational(const TrajectoryDataset& d, const HypothesisSpec& spec);

/// Clipped twin outcomes over the in-region twin subset.
std::vector<double> twin_samples(const TwinDataset& d, const HypothesisSpec& spec);

/// Throws ValidationError if the twin dataset's action tag differs from the spec's.
TwinSummary summarize_twin(const TwinDataset& d, const HypothesisSpec& spec);

BoundSummary summary_from_samples(const QualifyingSamples& qs, double y_range);

}  // namespace twincheck
