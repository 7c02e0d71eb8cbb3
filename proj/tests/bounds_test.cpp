#include <random>

#include "doctest.h"
#include "twincheck/bounds.hpp"
#include "twincheck/errors.hpp"

using namespace twincheck;

namespace {

FeatureSchema schema1() {
  FeatureSchema s;
  s.horizon = 1;
  s.x0_features = {{"g", FeatureKind::Binary, 0}};
  s.step_features = {{"y", FeatureKind::Continuous, 0}};
  s.action_cardinalities = {2};
  return s;
}

FeatureSchema schema2() {
  FeatureSchema s;
  s.horizon = 2;
  s.x0_features = {{"g", FeatureKind::Binary, 0}};
  s.step_features = {{"y", FeatureKind::Continuous, 0}};
  s.action_cardinalities = {2, 2};
  return s;
}

HypothesisSpec spec1(double y_lo = 0.0, double y_up = 1.0) {
  HypothesisSpec h;
  h.id = "h1";
  h.t = 1;
  h.actions = {1};
  h.region.per_step.resize(2);
  h.region.per_step[0].push_back(MembershipConstraint{"g", {1}});
  h.outcome = {1, "y", y_lo, y_up};
  return h;
}

HypothesisSpec spec2() {
  HypothesisSpec h;
  h.id = "h2";
  h.t = 2;
  h.actions = {1, 1};
  h.region.per_step.resize(3);
  h.region.per_step[1].push_back(IntervalConstraint{"y", 0.0, 10.0, true});
  h.outcome = {2, "y", 0.0, 1.0};
  return h;
}

ObservationalTrajectory traj1(double g, int a, double y) {
  ObservationalTrajectory t;
  t.x0 = {g};
  t.steps = {{a, {y}}};
  return t;
}

ObservationalTrajectory traj2(double g, int a1, double y1, int a2, double y2) {
  ObservationalTrajectory t;
  t.x0 = {g};
  t.steps = {{a1, {y1}}, {a2, {y2}}};
  return t;
}

}  // namespace

TEST_CASE("last agreement index") {
  std::vector<int> target{1, 2, 3};
  CHECK(last_agreement_index(std::vector<int>{1, 2, 5}, target) == 2);
  CHECK(last_agreement_index(std::vector<int>{4, 2, 3}, target) == 0);
  CHECK(last_agreement_index(std::vector<int>{1, 2, 3}, target) == 3);
  CHECK_THROWS_AS(last_agreement_index(std::vector<int>{1, 2}, target), ValidationError);
}

TEST_CASE("transformed outcomes per trajectory") {
  const auto schema = schema2();
  const auto spec = spec2();

  SUBCASE("full agreement yields the observed clipped outcome twice") {
    const auto t = traj2(0, 1, 0.5, 1, 0.4);
    const auto r = transformed_outcomes(t, spec, schema);
    REQUIRE(r.has_value());
    CHECK(r->first == doctest::Approx(0.4));
    CHECK(r->second == doctest::Approx(0.4));
  }
  SUBCASE("in-region disagreement after step one yields the trivial bounds") {
    const auto t = traj2(0, 1, 0.5, 0, 0.4);  // N = 1, X_1 = 0.5 in B_1
    const auto r = transformed_outcomes(t, spec, schema);
    REQUIRE(r.has_value());
    CHECK(r->first == 0.0);
    CHECK(r->second == 1.0);
  }
  SUBCASE("leaving the region along the observed prefix disqualifies") {
    const auto t = traj2(0, 1, -5.0, 0, 0.4);  // N = 1 but X_1 outside B_1
    CHECK_FALSE(transformed_outcomes(t, spec, schema).has_value());
  }
  SUBCASE("membership past the agreement point is not consulted") {
    // Disagrees at step 1, so only B_0 matters; X_1 outside B_1 is fine.
    const auto t = traj2(0, 0, -5.0, 0, 0.4);
    const auto r = transformed_outcomes(t, spec, schema);
    REQUIRE(r.has_value());
    CHECK(r->first == 0.0);
    CHECK(r->second == 1.0);
  }
}

TEST_CASE("observational summary on a four-record example") {
  TrajectoryDataset d;
  d.schema = schema1();
  d.records.push_back(traj1(1, 1, 0.3));
  d.records.push_back(traj1(1, 1, 0.5));
  d.records.push_back(traj1(1, 0, 0.9));  // disagreeing action
  d.records.push_back(traj1(1, 0, 0.1));
  d.records.push_back(traj1(0, 1, 0.7));  // outside B_0, never qualifies

  const auto spec = spec1();
  const auto b = summarize_observational(d, spec);
  CHECK(b.n == 4);
  CHECK(b.mu_lo == doctest::Approx(0.2));   // (0.3 + 0.5 + 0 + 0) / 4
  CHECK(b.mu_up == doctest::Approx(0.7));   // (0.3 + 0.5 + 1 + 1) / 4
  CHECK(b.propensity_hat == doctest::Approx(0.5));
  CHECK(b.tightness_hat == doctest::Approx(0.5));

  const auto qs = qualifying_samples(d, spec);
  CHECK(qs.agree_count == 2);
  for (std::size_t i = 0; i < qs.y_lo.size(); ++i) CHECK(qs.y_lo[i] <= qs.y_up[i]);
}

TEST_CASE("degenerate and edge summaries") {
  TrajectoryDataset d;
  d.schema = schema1();

  SUBCASE("empty dataset gives an empty summary") {
    const auto b = summarize_observational(d, spec1());
    CHECK(b.empty());
    CHECK(b.n == 0);
  }
  SUBCASE("full propensity collapses the interval") {
    d.records.push_back(traj1(1, 1, 0.2));
    d.records.push_back(traj1(1, 1, 0.8));
    const auto b = summarize_observational(d, spec1());
    CHECK(b.propensity_hat == 1.0);
    CHECK(b.mu_lo == doctest::Approx(b.mu_up));
    CHECK(b.tightness_hat == doctest::Approx(0.0));
  }
  SUBCASE("zero outcome range reports zero tightness") {
    d.records.push_back(traj1(1, 0, 0.2));
    const auto b = summarize_observational(d, spec1(0.5, 0.5));
    CHECK(b.n == 1);
    CHECK(b.tightness_hat == 0.0);
  }
}

TEST_CASE("tightness equals one minus propensity within 1e-12") {
  // Every disagreeing sample contributes exactly the full interval, so the
  // identity is algebraic, not approximate.
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> uy(-0.5, 1.5);
  for (int rep = 0; rep < 50; ++rep) {
    TrajectoryDataset d;
    d.schema = schema1();
    const int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i)
      d.records.push_back(traj1(rng() % 2 ? 1 : 0, static_cast<int>(rng() % 2), uy(rng)));
    const auto b = summarize_observational(d, spec1());
    if (b.empty()) continue;
    CHECK(std::abs(b.tightness_hat - (1.0 - b.propensity_hat)) < 1e-12);
  }
}

TEST_CASE("widening the region never loses qualifying samples") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uy(0.0, 1.0);
  TrajectoryDataset d;
  d.schema = schema1();
  for (int i = 0; i < 200; ++i)
    d.records.push_back(traj1(rng() % 2 ? 1 : 0, static_cast<int>(rng() % 2), uy(rng)));

  auto narrow = spec1();
  auto wide = spec1();
  wide.region.per_step[0].clear();  // whole space
  CHECK(summarize_observational(d, wide).n >= summarize_observational(d, narrow).n);
  CHECK(summarize_observational(d, wide).n == 200);
}

TEST_CASE("twin summaries") {
  TwinDataset d;
  d.schema = schema1();
  d.actions = {1};
  d.records.push_back({{1.0}, {{0.2}}});
  d.records.push_back({{1.0}, {{0.4}}});
  d.records.push_back({{0.0}, {{0.9}}});  // outside B_0
  d.records.push_back({{1.0}, {{7.0}}});  // clipped to y_up

  const auto spec = spec1();
  const auto s = summarize_twin(d, spec);
  CHECK(s.n_hat == 3);
  CHECK(s.mu_hat == doctest::Approx((0.2 + 0.4 + 1.0) / 3.0));

  SUBCASE("no in-region twin trajectories") {
    TwinDataset e;
    e.schema = d.schema;
    e.actions = {1};
    e.records.push_back({{0.0}, {{0.5}}});
    const auto es = summarize_twin(e, spec);
    CHECK(es.empty());
    CHECK(es.mu_hat == 0.0);
  }
  SUBCASE("action tag mismatch is a validation error") {
    TwinDataset e = d;
    e.actions = {0};
    CHECK_THROWS_AS(summarize_twin(e, spec), ValidationError);
  }
  SUBCASE("short records are rejected") {
    TwinDataset e = d;
    e.records[0].steps.clear();
    CHECK_THROWS_AS(summarize_twin(e, spec), ValidationError);
  }
}
