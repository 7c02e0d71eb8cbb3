#include "twincheck/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "twincheck/errors.hpp"

namespace twincheck {

void validate_record(const FeatureSchema& schema, const ObservationalTrajectory& t,
                     std::size_t index) {
  const std::string where = "record " + std::to_string(index) + ": ";
  if (t.x0.size() != schema.x0_features.size())
    throw ValidationError(where + "x0 has " + std::to_string(t.x0.size()) + " values, schema has " +
                          std::to_string(schema.x0_features.size()));
  if (static_cast<int>(t.steps.size()) != schema.horizon)
    throw ValidationError(where + "has " + std::to_string(t.steps.size()) + " steps, schema horizon is " +
                          std::to_string(schema.horizon));
  for (std::size_t s = 0; s < t.steps.size(); ++s) {
    const auto& step = t.steps[s];
    const int card = schema.action_cardinalities[s];
    if (step.action < 0 || step.action >= card)
      throw ValidationError(where + "action " + std::to_string(step.action) + " at step " +
                            std::to_string(s + 1) + " out of range [0," + std::to_string(card) + ")");
    if (step.x.size() != schema.step_features.size())
      throw ValidationError(where + "step " + std::to_string(s + 1) + " vector length mismatch");
    for (double v : step.x)
      if (!std::isfinite(v)) throw ValidationError(where + "non-finite value at step " + std::to_string(s + 1));
  }
  for (double v : t.x0)
    if (!std::isfinite(v)) throw ValidationError(where + "non-finite value in x0");
}

nlohmann::json trajectory_to_json(const ObservationalTrajectory& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps) steps.push_back({{"a", s.action}, {"x", s.x}});
  return nlohmann::json{{"x0", t.x0}, {"steps", steps}};
}

ObservationalTrajectory trajectory_from_json(const nlohmann::json& j) {
  ObservationalTrajectory t;
  t.x0 = j.at("x0").get<std::vector<double>>();
  for (const auto& js : j.at("steps")) {
    TrajectoryStep s;
    s.action = js.at("a").get<int>();
    s.x = js.at("x").get<std::vector<double>>();
    t.steps.push_back(std::move(s));
  }
  return t;
}

TrajectoryDataset load_dataset(const std::string& path, const FeatureSchema& schema) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file '" + path + "'");
  TrajectoryDataset d;
  d.schema = schema;
  d.provenance = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("parse error at line " + std::to_string(lineno) + ": " + e.what());
    }
    ObservationalTrajectory t;
    try {
      t = trajectory_from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("record " + std::to_string(d.records.size()) + " (line " +
                            std::to_string(lineno) + ") missing field: " + e.what());
    }
    validate_record(schema, t, d.records.size());
    d.records.push_back(std::move(t));
  }
  return d;
}

void save_dataset(const TrajectoryDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write dataset file '" + path + "'");
  for (const auto& t : d.records) out << trajectory_to_json(t).dump() << '\n';
}

std::pair<TrajectoryDataset, TrajectoryDataset> split_dataset(const TrajectoryDataset& d,
                                                              double held_out_fraction,
                                                              std::uint64_t seed) {
  if (held_out_fraction < 0.0 || held_out_fraction > 1.0)
    throw ValidationError("held_out_fraction must lie in [0,1]");
  const std::size_t n = d.records.size();
  const auto k = static_cast<std::size_t>(
      std::llround(held_out_fraction * static_cast<double>(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  TrajectoryDataset held, main;
  held.schema = main.schema = d.schema;
  held.provenance = d.provenance + " [held-out]";
  main.provenance = d.provenance + " [main]";
  // Sort each part so the partition is independent of shuffle order details.
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  for (std::size_t i = 0; i < n; ++i) {
    (i < k ? held : main).records.push_back(d.records[idx[i]]);
  }
  return {std::move(held), std::move(main)};
}

}  // namespace twincheck
