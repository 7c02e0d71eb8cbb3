#include "twincheck/bounds.hpp"

#include <algorithm>

#include "twincheck/errors.hpp"
#include "twincheck/stats.hpp"

namespace twincheck {

int last_agreement_index(std::span<const int> taken, std::span<const int> target) {
  if (taken.size() != target.size())
    throw ValidationError("last_agreement_index: action sequence length mismatch");
  int n = 0;
  while (n < static_cast<int>(taken.size()) &&
         taken[static_cast<std::size_t>(n)] == target[static_cast<std::size_t>(n)])
    ++n;
  return n;
}

namespace {

std::vector<std::vector<double>> step_vectors(const ObservationalTrajectory& traj) {
  std::vector<std::vector<double>> xs;
  xs.reserve(traj.steps.size());
  for (const auto& s : traj.steps) xs.push_back(s.x);
  return xs;
}

}  // namespace

std::optional<std::pair<double, double>> transformed_outcomes(const ObservationalTrajectory& traj,
                                                              const HypothesisSpec& spec,
                                                              const FeatureSchema& schema) {
  const int t = spec.t;
  std::vector<int> taken;
  taken.reserve(static_cast<std::size_t>(t));
  for (int s = 0; s < t; ++s) taken.push_back(traj.steps[static_cast<std::size_t>(s)].action);
  const int agree = last_agreement_index(taken, spec.actions);

  const auto xs = step_vectors(traj);
  // Membership is judged on B_{0:N} only; steps past N are unobserved
  // counterfactuals under a_{1:t}.
  if (!region_contains_prefix(spec.region, schema, traj.x0, xs, agree)) return std::nullopt;

  if (agree == t) {
    const double y = spec.outcome.clipped_value(schema, xs);
    return std::make_pair(y, y);
  }
  return std::make_pair(spec.outcome.y_lo, spec.outcome.y_up);
}

QualifyingSamples qualifying_samples(const TrajectoryDataset& d, const HypothesisSpec& spec) {
  spec.validate(d.schema);
  QualifyingSamples qs;
  for (const auto& traj : d.records) {
    std::vector<int> taken;
    taken.reserve(static_cast<std::size_t>(spec.t));
    for (int s = 0; s < spec.t; ++s) taken.push_back(traj.steps[static_cast<std::size_t>(s)].action);
    const int agree = last_agreement_index(taken, spec.actions);
    const auto xs = step_vectors(traj);
    if (!region_contains_prefix(spec.region, d.schema, traj.x0, xs, agree)) continue;
    if (agree == spec.t) {
      const double y = spec.outcome.clipped_value(d.schema, xs);
      qs.y_lo.push_back(y);
      qs.y_up.push_back(y);
      ++qs.agree_count;
    } else {
      qs.y_lo.push_back(spec.outcome.y_lo);
      qs.y_up.push_back(spec.outcome.y_up);
    }
  }
  return qs;
}

BoundSummary summary_from_samples(const QualifyingSamples& qs, double y_range) {
  BoundSummary b;
  b.n = static_cast<long>(qs.y_lo.size());
  if (b.n == 0) return b;
  b.mu_lo = mean(qs.y_lo);
  b.mu_up = mean(qs.y_up);
  b.propensity_hat = static_cast<double>(qs.agree_count) / static_cast<double>(b.n);
  b.tightness_hat = y_range > 0.0 ? (b.mu_up - b.mu_lo) / y_range : 0.0;
  return b;
}

BoundSummary summarize_observational(const TrajectoryDataset& d, const HypothesisSpec& spec) {
  return summary_from_samples(qualifying_samples(d, spec), spec.outcome.range());
}

std::vector<double> twin_samples(const TwinDataset& d, const HypothesisSpec& spec) {
  if (d.actions != spec.actions)
    throw ValidationError("twin dataset action tag does not match hypothesis actions");
  spec.validate(d.schema);
  std::vector<double> ys;
  for (const auto& rec : d.records) {
    if (static_cast<int>(rec.steps.size()) < spec.t)
      throw ValidationError("twin record shorter than hypothesis timestep");
    if (!region_contains_prefix(spec.region, d.schema, rec.x0, rec.steps, spec.t)) continue;
    ys.push_back(spec.outcome.clipped_value(d.schema, rec.steps));
  }
  return ys;
}

TwinSummary summarize_twin(const TwinDataset& d, const HypothesisSpec& spec) {
  const auto ys = twin_samples(d, spec);
  TwinSummary s;
  s.n_hat = static_cast<long>(ys.size());
  if (s.n_hat > 0) s.mu_hat = mean(ys);
  return s;
}

}  // namespace twincheck
