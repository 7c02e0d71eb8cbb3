#include "twincheck/region.hpp"

#include <algorithm>
#include <cmath>

#include "twincheck/errors.hpp"

namespace twincheck {

namespace {

double feature_value(const FeatureSchema& schema, std::span<const double> x, int s,
                     const std::string& name) {
  const int idx = (s == 0) ? schema.x0_index(name) : schema.step_index(name);
  if (idx < 0)
    throw ValidationError("region constraint references unknown feature '" + name +
                          "' at timestep " + std::to_string(s));
  return x[static_cast<std::size_t>(idx)];
}

}  // namespace

bool region_contains_at(const RegionPredicate& r, const FeatureSchema& schema,
                        std::span<const double> x, int s) {
  if (s < 0 || s > r.horizon())
    throw ValidationError("region evaluated past its horizon");
  for (const auto& c : r.per_step[static_cast<std::size_t>(s)]) {
    if (const auto* iv = std::get_if<IntervalConstraint>(&c)) {
      const double v = feature_value(schema, x, s, iv->feature);
      const bool ok = v >= iv->lo && (iv->closed_right ? v <= iv->hi : v < iv->hi);
      if (!ok) return false;
    } else {
      const auto& mc = std::get<MembershipConstraint>(c);
      const int v = static_cast<int>(std::llround(feature_value(schema, x, s, mc.feature)));
      if (std::find(mc.values.begin(), mc.values.end(), v) == mc.values.end()) return false;
    }
  }
  return true;
}

bool region_contains_prefix(const RegionPredicate& r, const FeatureSchema& schema,
                            std::span<const double> x0,
                            std::span<const std::vector<double>> steps, int upto) {
  if (!region_contains_at(r, schema, x0, 0)) return false;
  for (int s = 1; s <= upto; ++s)
    if (!region_contains_at(r, schema, steps[static_cast<std::size_t>(s - 1)], s)) return false;
  return true;
}

nlohmann::json region_to_json(const RegionPredicate& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& conj : r.per_step) {
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : conj) {
      if (const auto* iv = std::get_if<IntervalConstraint>(&c)) {
        cs.push_back({{"type", "interval"},
                      {"feature", iv->feature},
                      {"lo", iv->lo},
                      {"hi", iv->hi},
                      {"closed_right", iv->closed_right}});
      } else {
        const auto& mc = std::get<MembershipConstraint>(c);
        cs.push_back({{"type", "membership"}, {"feature", mc.feature}, {"values", mc.values}});
      }
    }
    steps.push_back(cs);
  }
  return nlohmann::json{{"per_step", steps}};
}

RegionPredicate region_from_json(const nlohmann::json& j) {
  RegionPredicate r;
  try {
    for (const auto& jc : j.at("per_step")) {
      std::vector<Constraint> conj;
      for (const auto& c : jc) {
        const std::string type = c.at("type").get<std::string>();
        if (type == "interval") {
          conj.push_back(IntervalConstraint{c.at("feature").get<std::string>(),
                                            c.at("lo").get<double>(), c.at("hi").get<double>(),
                                            c.value("closed_right", false)});
        } else if (type == "membership") {
          conj.push_back(MembershipConstraint{c.at("feature").get<std::string>(),
                                              c.at("values").get<std::vector<int>>()});
        } else {
          throw ValidationError("unknown constraint type '" + type + "'");
        }
      }
      r.per_step.push_back(std::move(conj));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed region: ") + e.what());
  }
  return r;
}

}  // namespace twincheck
