#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace twincheck {

enum class FeatureKind { Continuous, Binary, Categorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
  int cardinality = 0;  // categorical only
};

/// Fixed-horizon data layout: one x0 vector plus T (action, x) steps.
/// All trajectories in a dataset conform to exactly one schema.
struct FeatureSchema {
  int horizon = 0;  // T, number of action steps
  std::vector<FeatureSpec> x0_features;
  std::vector<FeatureSpec> step_features;
  std::vector<int> action_cardinalities;  // size T

  void validate() const;  // throws ValidationError

  /// Index of a feature by name, -1 if absent.
  int x0_index(const std::string& name) const;
  int step_index(const std::string& name) const;
};

nlohmann::json schema_to_json(const FeatureSchema& s);
FeatureSchema schema_from_json(const nlohmann::json& j);
FeatureSchema load_schema(const std::string& path);

}  // namespace twincheck
