#include "twincheck/hypothesis.hpp"

#include <fstream>

#include "twincheck/errors.hpp"
#include "twincheck/stats.hpp"

namespace twincheck {

double OutcomeSpec::raw_value(const FeatureSchema& schema,
                              std::span<const std::vector<double>> steps) const {
  if (static_cast<int>(steps.size()) < t)
    throw ValidationError("outcome evaluated on a trajectory shorter than its timestep");
  const int idx = schema.step_index(feature);
  if (idx < 0) throw ValidationError("outcome feature '" + feature + "' not in step features");
  return steps[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(idx)];
}

double OutcomeSpec::clipped_value(const FeatureSchema& schema,
                                  std::span<const std::vector<double>> steps) const {
  return clip(raw_value(schema, steps), y_lo, y_up);
}

void HypothesisSpec::validate(const FeatureSchema& schema) const {
  if (t < 1 || t > schema.horizon)
    throw ValidationError("hypothesis timestep " + std::to_string(t) + " outside 1.." +
                          std::to_string(schema.horizon));
  if (static_cast<int>(actions.size()) != t)
    throw ValidationError("hypothesis needs exactly t action indices");
  for (int s = 0; s < t; ++s) {
    const int card = schema.action_cardinalities[static_cast<std::size_t>(s)];
    if (actions[static_cast<std::size_t>(s)] < 0 || actions[static_cast<std::size_t>(s)] >= card)
      throw ValidationError("hypothesis action out of range at step " + std::to_string(s + 1));
  }
  if (region.horizon() != t) throw ValidationError("hypothesis region horizon must equal t");
  if (outcome.t != t) throw ValidationError("hypothesis outcome timestep must equal t");
  if (outcome.y_lo > outcome.y_up) throw ValidationError("hypothesis needs y_lo <= y_up");
  if (schema.step_index(outcome.feature) < 0)
    throw ValidationError("outcome feature '" + outcome.feature + "' not in step features");
}

nlohmann::json hypothesis_to_json(const HypothesisSpec& h) {
  return nlohmann::json{{"id", h.id},
                        {"label", h.label},
                        {"t", h.t},
                        {"actions", h.actions},
                        {"region", region_to_json(h.region)},
                        {"outcome",
                         {{"t", h.outcome.t},
                          {"feature", h.outcome.feature},
                          {"y_lo", h.outcome.y_lo},
                          {"y_up", h.outcome.y_up}}}};
}

HypothesisSpec hypothesis_from_json(const nlohmann::json& j) {
  HypothesisSpec h;
  try {
    h.id = j.value("id", "");
    h.label = j.value("label", "");
    h.t = j.at("t").get<int>();
    h.actions = j.at("actions").get<std::vector<int>>();
    h.region = region_from_json(j.at("region"));
    const auto& jo = j.at("outcome");
    h.outcome.t = jo.at("t").get<int>();
    h.outcome.feature = jo.at("feature").get<std::string>();
    h.outcome.y_lo = jo.at("y_lo").get<double>();
    h.outcome.y_up = jo.at("y_up").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed hypothesis: ") + e.what());
  }
  return h;
}

std::vector<HypothesisSpec> load_hypotheses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open hypothesis file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("cannot parse hypothesis file '" + path + "': " + e.what());
  }
  std::vector<HypothesisSpec> hs;
  for (const auto& jh : j) hs.push_back(hypothesis_from_json(jh));
  return hs;
}

void save_hypotheses(const std::vector<HypothesisSpec>& hs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write hypothesis file '" + path + "'");
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& h : hs) arr.push_back(hypothesis_to_json(h));
  out << arr.dump(2) << '\n';
}

}  // namespace twincheck
