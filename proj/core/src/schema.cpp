#include "twincheck/schema.hpp"

#include <fstream>
#include <unordered_set>

#include "twincheck/errors.hpp"

namespace twincheck {

namespace {

void check_unique_names(const std::vector<FeatureSpec>& fs, const char* which) {
  std::unordered_set<std::string> seen;
  for (const auto& f : fs) {
    if (!seen.insert(f.name).second)
      throw ValidationError(std::string("duplicate feature name '") + f.name + "' in " + which);
  }
}

std::string kind_to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::Continuous: return "continuous";
    case FeatureKind::Binary: return "binary";
    case FeatureKind::Categorical: return "categorical";
  }
  return "continuous";
}

FeatureKind kind_from_string(const std::string& s) {
  if (s == "continuous") return FeatureKind::Continuous;
  if (s == "binary") return FeatureKind::Binary;
  if (s == "categorical") return FeatureKind::Categorical;
  throw ValidationError("unknown feature kind '" + s + "'");
}

int index_of(const std::vector<FeatureSpec>& fs, const std::string& name) {
  for (std::size_t i = 0; i < fs.size(); ++i)
    if (fs[i].name == name) return static_cast<int>(i);
  return -1;
}

}  // namespace

void FeatureSchema::validate() const {
  if (horizon < 1) throw ValidationError("schema horizon must be >= 1");
  if (static_cast<int>(action_cardinalities.size()) != horizon)
    throw ValidationError("schema needs one action cardinality per step");
  for (int c : action_cardinalities)
    if (c < 1) throw ValidationError("action cardinality must be >= 1");
  check_unique_names(x0_features, "x0_features");
  check_unique_names(step_features, "step_features");
  for (const auto& f : step_features)
    if (f.kind == FeatureKind::Categorical && f.cardinality < 1)
      throw ValidationError("categorical feature '" + f.name + "' needs a cardinality");
  for (const auto& f : x0_features)
    if (f.kind == FeatureKind::Categorical && f.cardinality < 1)
      throw ValidationError("categorical feature '" + f.name + "' needs a cardinality");
}

int FeatureSchema::x0_index(const std::string& name) const { return index_of(x0_features, name); }
int FeatureSchema::step_index(const std::string& name) const { return index_of(step_features, name); }

nlohmann::json schema_to_json(const FeatureSchema& s) {
  auto features = [](const std::vector<FeatureSpec>& fs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : fs) {
      nlohmann::json jf{{"name", f.name}, {"kind", kind_to_string(f.kind)}};
      if (f.kind == FeatureKind::Categorical) jf["cardinality"] = f.cardinality;
      arr.push_back(jf);
    }
    return arr;
  };
  return nlohmann::json{{"T", s.horizon},
                        {"x0_features", features(s.x0_features)},
                        {"step_features", features(s.step_features)},
                        {"action_cardinalities", s.action_cardinalities}};
}

FeatureSchema schema_from_json(const nlohmann::json& j) {
  FeatureSchema s;
  try {
    s.horizon = j.at("T").get<int>();
    auto features = [](const nlohmann::json& arr) {
      std::vector<FeatureSpec> fs;
      for (const auto& jf : arr) {
        FeatureSpec f;
        f.name = jf.at("name").get<std::string>();
        f.kind = kind_from_string(jf.at("kind").get<std::string>());
        if (f.kind == FeatureKind::Categorical) f.cardinality = jf.at("cardinality").get<int>();
        fs.push_back(std::move(f));
      }
      return fs;
    };
    s.x0_features = features(j.at("x0_features"));
    s.step_features = features(j.at("step_features"));
    s.action_cardinalities = j.at("action_cardinalities").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed schema manifest: ") + e.what());
  }
  s.validate();
  return s;
}

FeatureSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("cannot parse schema file '" + path + "': " + e.what());
  }
  return schema_from_json(j);
}

}  // namespace twincheck
