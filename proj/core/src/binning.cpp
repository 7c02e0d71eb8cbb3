#include "twincheck/binning.hpp"

#include <algorithm>
#include <cmath>

#include "twincheck/errors.hpp"
#include "twincheck/stats.hpp"

namespace twincheck {

int ActionBinning::num_actions() const {
  int n = 1;
  for (std::size_t i = 0; i < dims.size(); ++i) n *= 5;
  return n;
}

ActionBinning fit_action_binning(const TrajectoryDataset& d0,
                                 const std::vector<std::string>& raw_dose_columns) {
  ActionBinning out;
  for (const auto& col : raw_dose_columns) {
    const int ci = d0.schema.step_index(col);
    if (ci < 0) throw ValidationError("dose column '" + col + "' not in step features");
    if (d0.schema.step_features[ci].kind != FeatureKind::Continuous)
      throw ValidationError("dose column '" + col + "' is not continuous");

    std::vector<double> doses;
    for (const auto& t : d0.records)
      for (const auto& s : t.steps) {
        const double v = s.x[static_cast<std::size_t>(ci)];
        if (v < 0.0) throw ValidationError("negative dose in column '" + col + "'");
        doses.push_back(v);
      }

    std::vector<double> positive;
    std::copy_if(doses.begin(), doses.end(), std::back_inserter(positive),
                 [](double v) { return v > 0.0; });
    if (positive.empty())
      throw StageError("degenerate binning: no strictly positive doses in column '" + col + "'");
    std::sort(positive.begin(), positive.end());

    DoseBinning b;
    b.column = col;
    b.edges = {quantile_sorted(positive, 0.25), quantile_sorted(positive, 0.50),
               quantile_sorted(positive, 0.75)};
    if (!(b.edges[0] < b.edges[1] && b.edges[1] < b.edges[2]))
      throw StageError("degenerate binning: non-increasing quartile edges in column '" + col + "'");

    std::vector<std::vector<double>> by_bin(5);
    for (double v : doses) by_bin[static_cast<std::size_t>(dose_bin(b, v))].push_back(v);
    for (int k = 0; k < 5; ++k) {
      auto& vals = by_bin[static_cast<std::size_t>(k)];
      // An unpopulated nonzero bin falls back to its nearest edge.
      if (vals.empty()) {
        b.representatives.push_back(k == 0 ? 0.0 : b.edges[static_cast<std::size_t>(std::min(k - 1, 2))]);
      } else {
        b.representatives.push_back(quantile(vals, 0.5));
      }
    }
    out.dims.push_back(std::move(b));
  }
  return out;
}

int dose_bin(const DoseBinning& b, double dose) {
  if (dose == 0.0) return 0;
  if (dose < b.edges[0]) return 1;
  if (dose < b.edges[1]) return 2;
  if (dose < b.edges[2]) return 3;
  return 4;
}

int action_index(const ActionBinning& b, std::span<const double> doses) {
  if (doses.size() != b.dims.size())
    throw ValidationError("dose vector length does not match binning dimensions");
  int idx = 0;
  for (std::size_t i = 0; i < b.dims.size(); ++i) idx = idx * 5 + dose_bin(b.dims[i], doses[i]);
  return idx;
}

std::vector<double> representative_doses(const ActionBinning& b, int action) {
  if (action < 0 || action >= b.num_actions())
    throw ValidationError("action index out of range for binning");
  std::vector<double> doses(b.dims.size());
  for (std::size_t i = b.dims.size(); i-- > 0;) {
    doses[i] = b.dims[i].representatives[static_cast<std::size_t>(action % 5)];
    action /= 5;
  }
  return doses;
}

TrajectoryDataset apply_action_binning(const TrajectoryDataset& d, const ActionBinning& b) {
  std::vector<int> cols;
  for (const auto& dim : b.dims) {
    const int ci = d.schema.step_index(dim.column);
    if (ci < 0) throw ValidationError("dose column '" + dim.column + "' not in step features");
    cols.push_back(ci);
  }
  TrajectoryDataset out = d;
  for (auto& card : out.schema.action_cardinalities) card = b.num_actions();
  std::vector<double> doses(cols.size());
  for (auto& t : out.records)
    for (auto& s : t.steps) {
      for (std::size_t i = 0; i < cols.size(); ++i)
        doses[i] = s.x[static_cast<std::size_t>(cols[i])];
      s.action = action_index(b, doses);
    }
  return out;
}

nlohmann::json binning_to_json(const ActionBinning& b) {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& d : b.dims)
    dims.push_back({{"column", d.column}, {"edges", d.edges}, {"representatives", d.representatives}});
  return nlohmann::json{{"dims", dims}};
}

ActionBinning binning_from_json(const nlohmann::json& j) {
  ActionBinning b;
  try {
    for (const auto& jd : j.at("dims")) {
      DoseBinning d;
      d.column = jd.value("column", "");
      d.edges = jd.at("edges").get<std::vector<double>>();
      d.representatives = jd.at("representatives").get<std::vector<double>>();
      if (d.edges.size() != 3 || d.representatives.size() != 5)
        throw ValidationError("binning dimension needs 3 edges and 5 representatives");
      b.dims.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed binning: ") + e.what());
  }
  return b;
}

}  // namespace twincheck
