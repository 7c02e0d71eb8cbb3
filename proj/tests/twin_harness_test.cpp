#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "twincheck/builtin_twins.hpp"
#include "twincheck/errors.hpp"
#include "twincheck/hypothesis_gen.hpp"
#include "twincheck/twin.hpp"
#include "twincheck/world.hpp"

using namespace twincheck;

namespace {

bool twin_datasets_equal(const TwinDataset& a, const TwinDataset& b) {
  if (a.actions != b.actions || a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    if (a.records[i].x0 != b.records[i].x0) return false;
    if (a.records[i].steps != b.records[i].steps) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("twin dataset generation basics") {
  const auto w = brake_pad_world();
  const auto d = sample_observational(w, 200, 3);
  WorldTwinFactory twin(w, TwinMode::Correct);

  SUBCASE("zero sessions yields an empty tagged dataset") {
    const auto td = generate_twin_dataset(d, {1}, twin, 0, 5);
    CHECK(td.records.empty());
    CHECK(td.actions == std::vector<int>{1});
    CHECK(td.twin_id == "world:brake-pad:correct");
    CHECK(td.seed == 5);
  }
  SUBCASE("drawing every record preserves the x0 multiset") {
    const auto td = generate_twin_dataset(d, {1}, twin, 200, 5);
    REQUIRE(td.records.size() == 200);
    std::multiset<double> obs_x0, twin_x0;
    for (const auto& r : d.records) obs_x0.insert(r.x0[0]);
    for (const auto& r : td.records) twin_x0.insert(r.x0[0]);
    CHECK(obs_x0 == twin_x0);
    for (const auto& r : td.records) CHECK(r.steps.size() == 1);
  }
  SUBCASE("asking for more sessions than records is a validation error") {
    CHECK_THROWS_AS(generate_twin_dataset(d, {1}, twin, 201, 5), ValidationError);
  }
  SUBCASE("bit-identical determinism") {
    const auto a = generate_twin_dataset(d, {1}, twin, 150, 5);
    const auto b = generate_twin_dataset(d, {1}, twin, 150, 5);
    CHECK(twin_datasets_equal(a, b));
    const auto c = generate_twin_dataset(d, {1}, twin, 150, 6);
    CHECK_FALSE(twin_datasets_equal(a, c));
  }
  SUBCASE("parallel generation matches the serial result") {
    TwinGenOptions par;
    par.parallelism = 4;
    const auto serial = generate_twin_dataset(d, {1}, twin, 200, 5);
    const auto parallel = generate_twin_dataset(d, {1}, twin, 200, 5, par);
    CHECK(twin_datasets_equal(serial, parallel));
  }
}

TEST_CASE("shifted twin with zero delta matches the correct twin") {
  const auto w = confounded_chain_world();
  const auto d = sample_observational(w, 300, 11);
  WorldTwinFactory correct(w, TwinMode::Correct);
  WorldTwinFactory shifted(w, TwinMode::Shifted, 0.0);
  const auto a = generate_twin_dataset(d, {1, 0}, correct, 300, 2);
  auto b = generate_twin_dataset(d, {1, 0}, shifted, 300, 2);
  CHECK(twin_datasets_equal(a, b));
  CHECK(shifted.clamped_emissions() == 0);
  CHECK(shifted.id() == "world:confounded-chain:shifted:0.000000");
}

TEST_CASE("shifted twin clamps to the value range and counts it") {
  const auto w = brake_pad_world();
  const auto d = sample_observational(w, 100, 11);
  WorldTwinFactory shifted(w, TwinMode::Shifted, 5.0);  // values are {0, 1}
  const auto td = generate_twin_dataset(d, {1}, shifted, 100, 2);
  for (const auto& r : td.records) CHECK(r.steps[0][0] == 1.0);  // everything clamps up
  CHECK(shifted.clamped_emissions() == 100);
}

TEST_CASE("propensity-blind twin reproduces the naive conditional") {
  // The frozen observational law gives P(stopped | aggressive) = 0.9, far from
  // the interventional 0.5 a correct twin would emit.
  const auto w = brake_pad_world();
  const long n = 20000;
  const auto d = sample_observational(w, n, 21);
  WorldTwinFactory blind(w, TwinMode::PropensityBlind);
  CHECK(blind.id() == "world:brake-pad:blind");
  const auto td = generate_twin_dataset(d, {1}, blind, n, 22);
  double mean = 0.0;
  for (const auto& r : td.records) mean += r.steps[0][0];
  mean /= static_cast<double>(n);
  const double se = std::sqrt(0.9 * 0.1 / static_cast<double>(n));
  CHECK(std::abs(mean - 0.9) < 4 * se);
}

TEST_CASE("correct twin matches the enumerated interventional law") {
  const auto w = confounded_chain_world();
  const std::vector<int> actions{1, 1};
  const long n = 50000;
  const auto d = sample_observational(w, n, 31);
  WorldTwinFactory twin(w, TwinMode::Correct);
  const auto td = generate_twin_dataset(d, actions, twin, n, 32);

  std::map<std::pair<double, double>, double> expected;
  for (const auto& atom : enumerate_interventional(w, actions)) {
    const double x1 = w.x_values[0][static_cast<std::size_t>(atom.x[0])];
    const double x2 = w.x_values[1][static_cast<std::size_t>(atom.x[1])];
    expected[{x1, x2}] += atom.prob;
  }
  std::map<std::pair<double, double>, long> counts;
  for (const auto& r : td.records) ++counts[{r.steps[0][0], r.steps[1][0]}];
  for (const auto& [cell, p] : expected) {
    const double freq = static_cast<double>(counts[cell]) / static_cast<double>(n);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    CHECK(std::abs(freq - p) < 4 * se + 1e-9);
  }
}

TEST_CASE("sessions are independent of interleaving") {
  const auto w = confounded_chain_world();
  WorldTwinFactory twin(w, TwinMode::Correct);

  auto run_sequential = [&](std::uint64_t seed) {
    auto s = twin.make_session(seed);
    s->init(std::vector<double>{0.0});
    std::vector<double> out;
    out.push_back(s->step(1, {})[0]);
    out.push_back(s->step(0, {})[0]);
    return out;
  };
  const auto a_ref = run_sequential(101);
  const auto b_ref = run_sequential(202);

  auto sa = twin.make_session(101);
  auto sb = twin.make_session(202);
  sa->init(std::vector<double>{0.0});
  sb->init(std::vector<double>{0.0});
  std::vector<double> a{sa->step(1, {})[0]}, b{sb->step(1, {})[0]};
  a.push_back(sa->step(0, {})[0]);
  b.push_back(sb->step(0, {})[0]);
  CHECK(a == a_ref);
  CHECK(b == b_ref);
}

TEST_CASE("world twin session misuse") {
  const auto w = brake_pad_world();
  WorldTwinFactory twin(w, TwinMode::Correct);
  auto s = twin.make_session(1);
  CHECK_THROWS_AS(s->step(1, {}), StageError);  // stepped before init
  s->init(std::vector<double>{0.0});
  CHECK_THROWS_AS(s->step(5, {}), ValidationError);  // action out of range
  s->init(std::vector<double>{0.0});
  s->step(1, {});
  CHECK_THROWS_AS(s->step(1, {}), StageError);  // past the horizon
  CHECK_THROWS_AS(s->init(std::vector<double>{42.0}), StageError);  // unknown x0 value
}

TEST_CASE("twin dataset file round trip") {
  const auto w = confounded_chain_world();
  const auto d = sample_observational(w, 50, 41);
  WorldTwinFactory twin(w, TwinMode::Correct);
  auto td = generate_twin_dataset(d, {0, 1}, twin, 50, 42);
  td.failed_sessions = {7, 9};

  const std::string path = "tmp_twin.ndjson";
  save_twin_dataset(td, path);
  const auto back = load_twin_dataset(path, d.schema);
  CHECK(twin_datasets_equal(td, back));
  CHECK(back.twin_id == td.twin_id);
  CHECK(back.seed == 42);
  CHECK(back.failed_sessions == td.failed_sessions);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_twin_dataset(path, d.schema), ValidationError);
}

namespace {

FeatureSchema gen_schema() {
  FeatureSchema s;
  s.horizon = 2;
  s.x0_features = {{"sex", FeatureKind::Binary, 0}, {"age", FeatureKind::Continuous, 0}};
  s.step_features = {{"y", FeatureKind::Continuous, 0}};
  s.action_cardinalities = {2, 2};
  return s;
}

TrajectoryDataset gen_dataset(int n, std::uint64_t seed) {
  TrajectoryDataset d;
  d.schema = gen_schema();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uy(0.0, 1.0);
  std::uniform_real_distribution<double> uage(20.0, 80.0);
  for (int i = 0; i < n; ++i) {
    ObservationalTrajectory t;
    t.x0 = {static_cast<double>(rng() % 2), uage(rng)};
    t.steps = {{static_cast<int>(rng() % 2), {uy(rng)}},
               {static_cast<int>(rng() % 2), {uy(rng)}}};
    d.records.push_back(std::move(t));
  }
  return d;
}

}  // namespace

TEST_CASE("hypothesis generation") {
  GenerationConfig cfg;
  cfg.quantities = {"y"};

  SUBCASE("a single trajectory yields one cell per timestep") {
    auto d = gen_dataset(1, 1);
    const auto hs = generate_hypotheses(d, cfg);
    REQUIRE(hs.size() == 2);  // t = 1 and t = 2
    CHECK(hs[0].t == 1);
    CHECK(hs[1].t == 2);
    // Support of size one collapses the outcome quantiles; kept, not dropped.
    CHECK(hs[0].outcome.degenerate());
    CHECK(hs[0].id.substr(0, 4) == "y/t1");
  }
  SUBCASE("extreme quantiles give the support min and max") {
    auto d = gen_dataset(60, 2);
    cfg.q_lo = 0.0;
    cfg.q_up = 1.0;
    cfg.median_split = false;
    const auto hs = generate_hypotheses(d, cfg);
    for (const auto& h : hs) {
      double lo = 1e300, hi = -1e300;
      long support = 0;
      for (const auto& r : d.records) {
        bool match = true;
        for (int s = 0; s < h.t; ++s)
          if (r.steps[static_cast<std::size_t>(s)].action != h.actions[static_cast<std::size_t>(s)])
            match = false;
        if (!match) continue;
        ++support;
        const double v = r.steps[static_cast<std::size_t>(h.t - 1)].x[0];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      CHECK(support > 0);
      CHECK(h.outcome.y_lo == doctest::Approx(lo));
      CHECK(h.outcome.y_up == doctest::Approx(hi));
    }
  }
  SUBCASE("cell count matches a brute-force enumeration") {
    auto d = gen_dataset(50, 3);
    const auto hs = generate_hypotheses(d, cfg);

    // t = 1 cells: (a1, above-median flag of y at step 1).
    std::vector<double> y1;
    for (const auto& r : d.records) y1.push_back(r.steps[0].x[0]);
    std::sort(y1.begin(), y1.end());
    const double med = (y1[24] + y1[25]) / 2.0;
    std::set<std::pair<int, int>> cells;
    for (const auto& r : d.records)
      cells.insert({r.steps[0].action, r.steps[0].x[0] >= med ? 1 : 0});
    long t1 = 0;
    for (const auto& h : hs)
      if (h.t == 1) ++t1;
    CHECK(t1 == static_cast<long>(cells.size()));
  }
  SUBCASE("sex and age factors add x0 constraints") {
    auto d = gen_dataset(80, 4);
    cfg.sex_feature = "sex";
    cfg.age_feature = "age";
    const auto hs = generate_hypotheses(d, cfg);
    REQUIRE(!hs.empty());
    for (const auto& h : hs) CHECK(h.region.per_step[0].size() == 2);
    // Each trajectory supports exactly one cell per (t), so cells partition.
    long t1 = 0;
    for (const auto& h : hs)
      if (h.t == 1) ++t1;
    CHECK(t1 >= 2);
  }
  SUBCASE("deterministic output") {
    auto d = gen_dataset(40, 5);
    const auto a = generate_hypotheses(d, cfg);
    const auto b = generate_hypotheses(d, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].id == b[i].id);
      CHECK(a[i].outcome.y_lo == b[i].outcome.y_lo);
    }
  }
  SUBCASE("configuration errors") {
    auto d = gen_dataset(10, 6);
    TrajectoryDataset empty;
    empty.schema = d.schema;
    CHECK_THROWS_AS(generate_hypotheses(empty, cfg), ValidationError);
    GenerationConfig bad = cfg;
    bad.quantities = {};
    CHECK_THROWS_AS(generate_hypotheses(d, bad), ValidationError);
    bad = cfg;
    bad.q_lo = 0.9;
    bad.q_up = 0.1;
    CHECK_THROWS_AS(generate_hypotheses(d, bad), ValidationError);
    bad = cfg;
    bad.quantities = {"nope"};
    CHECK_THROWS_AS(generate_hypotheses(d, bad), ValidationError);
    bad = cfg;
    bad.sex_feature = "nope";
    CHECK_THROWS_AS(generate_hypotheses(d, bad), ValidationError);
  }
}
