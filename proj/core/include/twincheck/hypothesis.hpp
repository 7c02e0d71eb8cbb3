#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "twincheck/region.hpp"
#include "twincheck/schema.hpp"

namespace twincheck {

/// Clipped scalar outcome f(x_{0:t}) = clip((x_t)_i, y_lo, y_up).
struct OutcomeSpec {
  int t = 1;             // target timestep
  std::string feature;   // step feature at time t
  double y_lo = 0.0;
  double y_up = 1.0;

  double range() const { return y_up - y_lo; }
  bool degenerate() const { return range() <= 0.0; }

  double raw_value(const FeatureSchema& schema, std::span<const std::vector<double>> steps) const;
  double clipped_value(const FeatureSchema& schema, std::span<const std::vector<double>> steps) const;
};

/// One (t, f, a_{1:t}, B_{0:t}) tuple; parameterizes an H_lo/H_up pair.
struct HypothesisSpec {
  int t = 1;
  std::vector<int> actions;  // a_{1:t}
  RegionPredicate region;    // B_{0:t}
  OutcomeSpec outcome;
  std::string label;  // quantity/group tag
  std::string id;

  void validate(const FeatureSchema& schema) const;
};

nlohmann::json hypothesis_to_json(const HypothesisSpec& h);
HypothesisSpec hypothesis_from_json(const nlohmann::json& j);

std::vector<HypothesisSpec> load_hypotheses(const std::string& path);
void save_hypotheses(const std::vector<HypothesisSpec>& hs, const std::string& path);

}  // namespace twincheck
