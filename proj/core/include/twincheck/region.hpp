#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "twincheck/schema.hpp"
#include "twincheck/trajectory.hpp"

namespace twincheck {

/// Interval on a continuous feature. Half-open on the right by default; the
/// topmost bin of a partition sets closed_right so quantile edges leave no gap.
struct IntervalConstraint {
  std::string feature;
  double lo;
  double hi;
  bool closed_right = false;
};

/// Membership set on a binary/categorical feature (values compared as rounded ints).
struct MembershipConstraint {
  std::string feature;
  std::vector<int> values;
};

using Constraint = std::variant<IntervalConstraint, MembershipConstraint>;

/// B_{0:t}: one conjunction of constraints per timestep. Empty conjunction at a
/// timestep means the whole space.
struct RegionPredicate {
  std::vector<std::vector<Constraint>> per_step;  // index 0 is x0, then steps 1..t

  int horizon() const { return static_cast<int>(per_step.size()) - 1; }
};

/// Membership of a single observation vector at timestep s (0 = x0).
bool region_contains_at(const RegionPredicate& r, const FeatureSchema& schema,
                        std::span<const double> x, int s);

/// Membership of the trajectory prefix X_{0:upto}.
bool region_contains_prefix(const RegionPredicate& r, const FeatureSchema& schema,
                            std::span<const double> x0,
                            std::span<const std::vector<double>> steps, int upto);

nlohmann::json region_to_json(const RegionPredicate& r);
RegionPredicate region_from_json(const nlohmann::json& j);

}  // namespace twincheck
