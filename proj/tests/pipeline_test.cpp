#include <algorithm>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "twincheck/builtin_twins.hpp"
#include "twincheck/errors.hpp"
#include "twincheck/report.hpp"
#include "twincheck/stats.hpp"

using namespace twincheck;

namespace {

AssessmentConfig high_propensity_config() {
  AssessmentConfig cfg;
  cfg.world = "brake-pad-high-propensity";
  cfg.world_samples = 4000;
  cfg.twin_samples = 1000;
  // The outcome is binary, so the median split would collapse the quantiles.
  cfg.generation.median_split = false;
  cfg.seed = 7;
  cfg.test.seed = 7;
  return cfg;
}

HypothesisSpec world_spec(std::vector<int> actions, double y_lo = 0.0, double y_up = 1.0) {
  HypothesisSpec h;
  h.t = static_cast<int>(actions.size());
  h.actions = std::move(actions);
  h.id = "spec-t" + std::to_string(h.t);
  h.label = "x";
  h.region.per_step.resize(static_cast<std::size_t>(h.t) + 1);
  h.outcome = {h.t, "x", y_lo, y_up};
  return h;
}

}  // namespace

TEST_CASE("assessment is deterministic given its config") {
  auto cfg = high_propensity_config();
  cfg.world_samples = 1000;
  cfg.twin_samples = 400;
  const auto a = run_assessment(cfg);
  const auto b = run_assessment(cfg);
  CHECK(report_to_json(a).dump() == report_to_json(b).dump());
  CHECK(report_to_csv(a) == report_to_csv(b));

  auto cfg2 = cfg;
  cfg2.seed = 8;
  cfg2.test.seed = 8;
  const auto c = run_assessment(cfg2);
  CHECK(report_to_json(a).dump() != report_to_json(c).dump());
}

TEST_CASE("a correct twin survives, a propensity-blind twin is falsified") {
  auto cfg = high_propensity_config();
  const auto clean = run_assessment(cfg);
  CHECK(clean.total_rejections() == 0);
  REQUIRE(!clean.outcomes.empty());
  long tested = 0;
  for (const auto& o : clean.outcomes)
    if (o.status == TestStatus::Tested) ++tested;
  CHECK(tested > 0);

  // Twin frozen on the observational law of the base brake-pad world predicts
  // the naive 0.9 while the data only tolerate an upper bound of 0.55.
  cfg.twin_world = "brake-pad";
  cfg.twin_mode = "blind";
  const auto blind = run_assessment(cfg);
  CHECK(blind.total_rejections() >= 1);
  bool up_rejected = false;
  for (std::size_t i = 0; i < blind.outcomes.size(); ++i)
    if (blind.rejected_up[i]) up_rejected = true;
  CHECK(up_rejected);
}

TEST_CASE("report invariants") {
  auto cfg = high_propensity_config();
  cfg.twin_world = "brake-pad";
  cfg.twin_mode = "blind";
  const auto rep = run_assessment(cfg);

  REQUIRE(rep.rejected_lo.size() == rep.outcomes.size());
  REQUIRE(rep.rejected_up.size() == rep.outcomes.size());
  long rej = 0, tested = 0, hyp = 0;
  for (std::size_t i = 0; i < rep.outcomes.size(); ++i) {
    // Only tested outcomes can be rejected.
    if (rep.outcomes[i].status != TestStatus::Tested) {
      CHECK_FALSE(rep.rejected_lo[i]);
      CHECK_FALSE(rep.rejected_up[i]);
    }
    rej += (rep.rejected_lo[i] ? 1 : 0) + (rep.rejected_up[i] ? 1 : 0);
  }
  for (const auto& row : rep.table) {
    hyp += row.hypotheses;
    tested += row.tested;
    CHECK(row.tested <= row.hypotheses);
    CHECK(row.rejected_lo + row.rejected_up <= 2 * row.tested);
  }
  CHECK(hyp == static_cast<long>(rep.outcomes.size()));
  CHECK(rep.total_rejections() == rej);

  const auto csv = report_to_csv(rep);
  CHECK(csv.substr(0, csv.find('\n')) == "quantity,hypotheses,tested,rejected_lo,rejected_up");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(rep.table.size()) + 1);

  CHECK(rep.metadata.contains("dataset_digest"));
  CHECK(rep.metadata.at("num_hypotheses").get<std::size_t>() == rep.outcomes.size());
  CHECK(rep.plot_data.contains("x"));
  CHECK(rep.plot_data.at("x").at("obs_histogram").contains("counts"));
}

TEST_CASE("an empty hypothesis file yields an empty report") {
  const std::string path = "tmp_empty_hyps.json";
  std::ofstream(path) << "[]\n";
  auto cfg = high_propensity_config();
  cfg.world_samples = 200;
  cfg.hypotheses_path = path;
  const auto rep = run_assessment(cfg);
  std::remove(path.c_str());
  CHECK(rep.outcomes.empty());
  CHECK(rep.table.empty());
  CHECK(rep.total_rejections() == 0);
  CHECK(report_to_csv(rep) == "quantity,hypotheses,tested,rejected_lo,rejected_up\n");
}

TEST_CASE("config JSON round trip and validation") {
  auto cfg = high_propensity_config();
  cfg.test.method = TestMethod::Bootstrap;
  cfg.test.bootstrap_variant = BootstrapVariant::Percentile;
  cfg.per_quantity_families = true;
  cfg.raw_dose_columns = {"dose"};
  const auto j = assessment_config_to_json(cfg);
  const auto back = assessment_config_from_json(j);
  CHECK(assessment_config_to_json(back) == j);

  auto bad = j;
  bad["method"] = "bayes";
  CHECK_THROWS_AS(assessment_config_from_json(bad), ValidationError);
  bad = j;
  bad["bootstrap_variant"] = "studentized";
  CHECK_THROWS_AS(assessment_config_from_json(bad), ValidationError);

  AssessmentConfig no_source;
  CHECK_THROWS_AS(run_assessment(no_source), ValidationError);
  AssessmentConfig no_twin;
  no_twin.dataset_path = "x.ndjson";
  no_twin.schema_path = "x.json";
  CHECK_THROWS_AS(run_assessment(no_twin), ValidationError);  // also: files missing
}

TEST_CASE("resolve_world knows the built-ins") {
  CHECK(resolve_world("brake-pad").name == "brake-pad");
  CHECK(resolve_world("confounded-chain").horizon == 2);
  CHECK(resolve_world("random:5").name == "random-5");
  CHECK_THROWS_AS(resolve_world("no/such/world.json"), ValidationError);
}

TEST_CASE("longitudinal comparison") {
  const auto w = confounded_chain_world();
  const auto obs = sample_observational(w, 3000, 1);
  WorldTwinFactory factory(w, TwinMode::Correct);
  const auto twin = generate_twin_dataset(obs, {1, 1}, factory, 1500, 2);
  const std::vector<HypothesisSpec> family{world_spec({1}), world_spec({1, 1})};

  const auto series = longitudinal_comparison(obs, twin, family, 0.05);
  REQUIRE(series.size() == 2);
  for (const auto& pt : series) {
    CHECK(pt.present);
    CHECK(pt.n > 0);
    CHECK(pt.n_hat > 0);
    CHECK(pt.q_lo_alpha < pt.q_up_alpha);
    CHECK(pt.qhat_lo_alpha < pt.q_hat);
    CHECK(pt.q_hat < pt.qhat_up_alpha);
  }
  CHECK(series[0].t == 1);
  CHECK(series[1].t == 2);

  SUBCASE("a twin built from the agreeing subset reproduces the naive curve") {
    // The agreeing subset depends on t, so each timestep gets its own mirror.
    for (const auto& spec : family) {
      TwinDataset mirror;
      mirror.schema = obs.schema;
      mirror.actions = spec.actions;
      for (const auto& r : obs.records) {
        bool agree = true;
        for (int s = 0; s < spec.t; ++s)
          if (r.steps[static_cast<std::size_t>(s)].action !=
              spec.actions[static_cast<std::size_t>(s)])
            agree = false;
        if (!agree) continue;
        TwinRecord rec;
        rec.x0 = r.x0;
        for (int s = 0; s < spec.t; ++s)
          rec.steps.push_back(r.steps[static_cast<std::size_t>(s)].x);
        mirror.records.push_back(std::move(rec));
      }
      const auto mirrored = longitudinal_comparison(obs, mirror, {spec}, 0.05);
      REQUIRE(mirrored.size() == 1);
      REQUIRE(mirrored[0].present);
      CHECK(mirrored[0].q_hat == doctest::Approx(mirrored[0].naive).epsilon(1e-12));
    }
  }
  SUBCASE("unsupported timesteps are marked absent") {
    auto blocked = family;
    blocked[1].region.per_step[2].push_back(IntervalConstraint{"x", 5.0, 6.0, true});
    const auto series2 = longitudinal_comparison(obs, twin, blocked, 0.05);
    CHECK(series2[0].present);
    CHECK_FALSE(series2[1].present);
    CHECK(series2[1].n_hat == 0);
  }
  SUBCASE("family must prefix the twin's action tag") {
    const std::vector<HypothesisSpec> wrong{world_spec({0})};
    CHECK_THROWS_AS(longitudinal_comparison(obs, twin, wrong, 0.05), ValidationError);
    const std::vector<HypothesisSpec> too_long{world_spec({1, 1}), world_spec({1, 1, 1})};
    CHECK_THROWS_AS(longitudinal_comparison(obs, twin, too_long, 0.05), ValidationError);
  }
}

TEST_CASE("sensitivity sweep") {
  const auto data_world = brake_pad_high_propensity_world();
  const auto obs = sample_observational(data_world, 4000, 3);
  WorldTwinFactory blind(brake_pad_world(), TwinMode::PropensityBlind);
  std::map<std::vector<int>, TwinDataset> twins;
  twins.emplace(std::vector<int>{1}, generate_twin_dataset(obs, {1}, blind, 2000, 4));
  const std::vector<HypothesisSpec> specs{world_spec({1})};
  TestConfig tc;
  tc.seed = 5;

  SUBCASE("zero widening reproduces the base decisions") {
    const auto base = test_hypothesis(obs, twins.at({1}), specs[0], [&] {
      TestConfig t = tc;
      t.seed = mix_seed(tc.seed, 1000);
      return t;
    }());
    const auto holm = holm_bonferroni(std::vector<double>{base.p_lo, base.p_up}, 0.05);
    const auto rows = sensitivity_sweep(obs, twins, specs, tc, 0.05, {0.0});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].delta == 0.0);
    CHECK_FALSE(rows[0].skipped);
    CHECK(rows[0].tested == 1);
    CHECK(rows[0].rejections == static_cast<long>(holm.num_rejected()));
    CHECK(rows[0].rejections >= 1);  // blind twin fails even before widening
  }
  SUBCASE("rejections fade as the intervals widen") {
    const auto rows = sensitivity_sweep(obs, twins, specs, tc, 0.05, {0.0, 0.5, 1.0, 2.0, 6.0});
    REQUIRE(rows.size() == 5);
    for (std::size_t i = 1; i < rows.size(); ++i)
      CHECK(rows[i].rejections <= rows[i - 1].rejections);
    CHECK(rows.back().rejections < rows.front().rejections);
  }
  SUBCASE("an interval collapsed by the widening is dropped") {
    const std::vector<HypothesisSpec> neg{world_spec({1}, -1.0, -0.5)};
    const auto rows = sensitivity_sweep(obs, twins, neg, tc, 0.05, {0.0, 4.0});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].specs_dropped == 0);
    CHECK(rows[1].specs_dropped == 1);
    CHECK(rows[1].skipped);
    CHECK(rows[1].tested == 0);
  }
}
