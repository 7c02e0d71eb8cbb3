#include "twincheck/hypothesis_gen.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "twincheck/errors.hpp"
#include "twincheck/stats.hpp"

namespace twincheck {

namespace {

constexpr double kNegInf = std::numeric_limits<double>::lowest();
constexpr double kPosInf = std::numeric_limits<double>::max();

struct CellKey {
  std::vector<int> actions;
  int sex = 0;        // rounded value, 0 when disabled
  int age_bin = 0;    // quartile bin, 0 when disabled
  std::vector<int> above;  // per conditioning step: 1 if value >= median

  auto operator<=>(const CellKey&) const = default;
};

int quartile_bin(const std::vector<double>& edges, double v) {
  int b = 0;
  while (b < 3 && v >= edges[static_cast<std::size_t>(b)]) ++b;
  return b;
}

IntervalConstraint quartile_interval(const std::string& feature, const std::vector<double>& edges,
                                     int bin) {
  IntervalConstraint c;
  c.feature = feature;
  c.lo = bin == 0 ? kNegInf : edges[static_cast<std::size_t>(bin - 1)];
  c.hi = bin == 3 ? kPosInf : edges[static_cast<std::size_t>(bin)];
  c.closed_right = bin == 3;
  return c;
}

IntervalConstraint median_interval(const std::string& feature, double med, bool above) {
  IntervalConstraint c;
  c.feature = feature;
  c.lo = above ? med : kNegInf;
  c.hi = above ? kPosInf : med;
  c.closed_right = above;
  return c;
}

}  // namespace

std::vector<HypothesisSpec> generate_hypotheses(const TrajectoryDataset& d0,
                                                const GenerationConfig& cfg) {
  if (d0.records.empty()) throw ValidationError("hypothesis generation needs a nonempty dataset");
  if (cfg.quantities.empty()) throw ValidationError("no target quantities given");
  if (!(cfg.q_lo >= 0.0 && cfg.q_lo < cfg.q_up && cfg.q_up <= 1.0))
    throw ValidationError("need 0 <= q_lo < q_up <= 1");

  const auto& schema = d0.schema;
  const bool use_sex = !cfg.sex_feature.empty();
  const bool use_age = !cfg.age_feature.empty();
  const int sex_idx = use_sex ? schema.x0_index(cfg.sex_feature) : -1;
  const int age_idx = use_age ? schema.x0_index(cfg.age_feature) : -1;
  if (use_sex && sex_idx < 0)
    throw ValidationError("sex feature \"" + cfg.sex_feature + "\" not in the x0 schema");
  if (use_age && age_idx < 0)
    throw ValidationError("age feature \"" + cfg.age_feature + "\" not in the x0 schema");

  std::vector<double> age_edges;
  if (use_age) {
    std::vector<double> ages;
    ages.reserve(d0.records.size());
    for (const auto& r : d0.records) ages.push_back(r.x0[static_cast<std::size_t>(age_idx)]);
    age_edges = {quantile(ages, 0.25), quantile(ages, 0.5), quantile(ages, 0.75)};
  }

  std::vector<HypothesisSpec> out;
  for (const auto& quantity : cfg.quantities) {
    const int q_idx = schema.step_index(quantity);
    if (q_idx < 0) throw ValidationError("quantity \"" + quantity + "\" not in the step schema");

    for (int t = 1; t <= schema.horizon; ++t) {
      // Median thresholds for the conditioning split at steps 1..t.
      const int split_steps = cfg.median_split ? t : 0;
      std::vector<double> medians(static_cast<std::size_t>(t));
      if (cfg.pooled_median) {
        std::vector<double> pooled;
        pooled.reserve(d0.records.size() * static_cast<std::size_t>(t));
        for (const auto& r : d0.records)
          for (int s = 0; s < t; ++s)
            pooled.push_back(r.steps[static_cast<std::size_t>(s)].x[static_cast<std::size_t>(q_idx)]);
        const double med = quantile(pooled, 0.5);
        medians.assign(static_cast<std::size_t>(t), med);
      } else {
        for (int s = 0; s < t; ++s) {
          std::vector<double> vals;
          vals.reserve(d0.records.size());
          for (const auto& r : d0.records)
            vals.push_back(r.steps[static_cast<std::size_t>(s)].x[static_cast<std::size_t>(q_idx)]);
          medians[static_cast<std::size_t>(s)] = quantile(std::move(vals), 0.5);
        }
      }

      // Each trajectory lands in exactly one cell, so walking the dataset
      // enumerates precisely the supported cells.
      std::map<CellKey, std::vector<std::size_t>> cells;
      for (std::size_t i = 0; i < d0.records.size(); ++i) {
        const auto& r = d0.records[i];
        CellKey key;
        key.actions.reserve(static_cast<std::size_t>(t));
        for (int s = 0; s < t; ++s) key.actions.push_back(r.steps[static_cast<std::size_t>(s)].action);
        if (use_sex)
          key.sex = static_cast<int>(std::llround(r.x0[static_cast<std::size_t>(sex_idx)]));
        if (use_age)
          key.age_bin = quartile_bin(age_edges, r.x0[static_cast<std::size_t>(age_idx)]);
        key.above.reserve(static_cast<std::size_t>(split_steps));
        for (int s = 0; s < split_steps; ++s) {
          const double v = r.steps[static_cast<std::size_t>(s)].x[static_cast<std::size_t>(q_idx)];
          key.above.push_back(v >= medians[static_cast<std::size_t>(s)] ? 1 : 0);
        }
        cells[key].push_back(i);
      }

      std::size_t cell_no = 0;
      for (const auto& [key, support] : cells) {
        HypothesisSpec spec;
        spec.t = t;
        spec.actions = key.actions;
        spec.label = quantity;
        spec.region.per_step.resize(static_cast<std::size_t>(t) + 1);
        if (use_sex)
          spec.region.per_step[0].push_back(MembershipConstraint{cfg.sex_feature, {key.sex}});
        if (use_age)
          spec.region.per_step[0].push_back(
              quartile_interval(cfg.age_feature, age_edges, key.age_bin));
        for (int s = 0; s < split_steps; ++s)
          spec.region.per_step[static_cast<std::size_t>(s) + 1].push_back(
              median_interval(quantity, medians[static_cast<std::size_t>(s)],
                              key.above[static_cast<std::size_t>(s)] == 1));

        std::vector<double> support_vals;
        support_vals.reserve(support.size());
        for (std::size_t i : support)
          support_vals.push_back(
              d0.records[i].steps[static_cast<std::size_t>(t - 1)].x[static_cast<std::size_t>(q_idx)]);
        spec.outcome.t = t;
        spec.outcome.feature = quantity;
        spec.outcome.y_lo = quantile(support_vals, cfg.q_lo);
        spec.outcome.y_up = quantile(std::move(support_vals), cfg.q_up);

        std::ostringstream id;
        id << quantity << "/t" << t << "/a";
        for (std::size_t s = 0; s < key.actions.size(); ++s) {
          if (s) id << "-";
          id << key.actions[s];
        }
        id << "/c" << cell_no++;
        spec.id = id.str();
        spec.validate(schema);
        out.push_back(std::move(spec));
      }
    }
  }
  return out;
}

}  // namespace twincheck
