#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "twincheck/binning.hpp"
#include "twincheck/errors.hpp"
#include "twincheck/schema.hpp"
#include "twincheck/stats.hpp"
#include "twincheck/trajectory.hpp"

using namespace twincheck;

namespace {

FeatureSchema demo_schema() {
  FeatureSchema s;
  s.horizon = 2;
  s.x0_features = {{"sex", FeatureKind::Binary, 0}, {"age", FeatureKind::Continuous, 0}};
  s.step_features = {{"y", FeatureKind::Continuous, 0}};
  s.action_cardinalities = {2, 2};
  return s;
}

ObservationalTrajectory make_traj(double sex, double age, int a1, double y1, int a2, double y2) {
  ObservationalTrajectory t;
  t.x0 = {sex, age};
  t.steps = {{a1, {y1}}, {a2, {y2}}};
  return t;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("tmp_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename E, typename F>
std::string message_of(F&& f) {
  try {
    f();
  } catch (const E& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("quantile interpolates between order statistics") {
  std::vector<double> v{30, 10, 40, 20};  // unsorted on purpose
  CHECK(quantile(v, 0.25) == doctest::Approx(17.5));
  CHECK(quantile(v, 0.5) == doctest::Approx(25.0));
  CHECK(quantile(v, 0.75) == doctest::Approx(32.5));
  CHECK(quantile(v, 0.0) == doctest::Approx(10.0));
  CHECK(quantile(v, 1.0) == doctest::Approx(40.0));
  CHECK(quantile({7.0}, 0.3) == doctest::Approx(7.0));

  std::vector<double> sorted{10, 20, 30, 40};
  CHECK(quantile_sorted(sorted, 0.25) == doctest::Approx(17.5));

  CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(quantile({1.0}, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(quantile({1.0}, 1.1), std::invalid_argument);
}

TEST_CASE("mean, variance, clip") {
  std::vector<double> v{1, 2, 3, 4};
  CHECK(mean(v) == doctest::Approx(2.5));
  CHECK(sample_variance(v) == doctest::Approx(5.0 / 3.0));
  CHECK(sample_variance(std::vector<double>{9.0}) == 0.0);
  CHECK(clip(7.0, 2.0, 5.0) == 5.0);
  CHECK(clip(3.0, 2.0, 5.0) == 3.0);
  CHECK(clip(-1.0, 2.0, 5.0) == 2.0);
}

TEST_CASE("mix_seed decorrelates streams deterministically") {
  CHECK(mix_seed(42, 0) == mix_seed(42, 0));
  CHECK(mix_seed(42, 0) != mix_seed(42, 1));
  CHECK(mix_seed(42, 0) != mix_seed(43, 0));
  // Adjacent streams should not be adjacent outputs.
  CHECK(mix_seed(0, 1) != mix_seed(0, 0) + 1);
}

TEST_CASE("schema validation catches structural mistakes") {
  auto s = demo_schema();
  CHECK_NOTHROW(s.validate());

  SUBCASE("horizon must be positive") {
    s.horizon = 0;
    s.action_cardinalities = {};
    CHECK_THROWS_AS(s.validate(), ValidationError);
  }
  SUBCASE("one cardinality per step") {
    s.action_cardinalities = {2};
    CHECK_THROWS_AS(s.validate(), ValidationError);
  }
  SUBCASE("cardinalities at least one") {
    s.action_cardinalities = {2, 0};
    CHECK_THROWS_AS(s.validate(), ValidationError);
  }
  SUBCASE("duplicate feature names") {
    s.step_features.push_back({"y", FeatureKind::Continuous, 0});
    CHECK_THROWS_AS(s.validate(), ValidationError);
  }
  SUBCASE("categorical needs a cardinality") {
    s.step_features.push_back({"grade", FeatureKind::Categorical, 0});
    CHECK_THROWS_AS(s.validate(), ValidationError);
  }
}

TEST_CASE("schema JSON round trip") {
  auto s = demo_schema();
  s.step_features.push_back({"grade", FeatureKind::Categorical, 4});
  const auto j = schema_to_json(s);
  const auto back = schema_from_json(j);
  CHECK(back.horizon == s.horizon);
  CHECK(back.x0_features.size() == 2);
  CHECK(back.step_features[1].name == "grade");
  CHECK(back.step_features[1].cardinality == 4);
  CHECK(back.action_cardinalities == s.action_cardinalities);
  CHECK(schema_to_json(back) == j);

  auto bad = j;
  bad["step_features"][0]["kind"] = "mystery";
  CHECK_THROWS_AS(schema_from_json(bad), ValidationError);
}

TEST_CASE("feature lookup by name") {
  const auto s = demo_schema();
  CHECK(s.x0_index("age") == 1);
  CHECK(s.x0_index("missing") == -1);
  CHECK(s.step_index("y") == 0);
}

TEST_CASE("dataset NDJSON round trip is byte identical") {
  const auto schema = demo_schema();
  TrajectoryDataset d;
  d.schema = schema;
  d.records.push_back(make_traj(0, 55.5, 0, 1.25, 1, -3.0));
  d.records.push_back(make_traj(1, 40.0, 1, 0.0, 0, 2.5));

  TempFile f("roundtrip.ndjson");
  save_dataset(d, f.path);
  const auto first = slurp(f.path);
  const auto loaded = load_dataset(f.path, schema);
  REQUIRE(loaded.records.size() == 2);
  CHECK(loaded.records[1].steps[0].action == 1);
  CHECK(loaded.records[0].x0[1] == 55.5);

  TempFile g("roundtrip2.ndjson");
  save_dataset(loaded, g.path);
  CHECK(slurp(g.path) == first);
}

TEST_CASE("empty file loads as an empty dataset") {
  TempFile f("empty.ndjson");
  std::ofstream(f.path).close();
  const auto d = load_dataset(f.path, demo_schema());
  CHECK(d.records.empty());
  CHECK(d.schema.horizon == 2);
}

TEST_CASE("dataset load errors name the offending line or record") {
  const auto schema = demo_schema();

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_dataset("no_such_file.ndjson", schema), ValidationError);
  }
  SUBCASE("malformed JSON names the line") {
    TempFile f("badline.ndjson");
    std::ofstream out(f.path);
    out << trajectory_to_json(make_traj(0, 30, 0, 1, 0, 2)).dump() << "\n";
    out << "{not json\n";
    out.close();
    const auto msg = message_of<ValidationError>([&] { load_dataset(f.path, schema); });
    CHECK(msg.find("line 2") != std::string::npos);
  }
  SUBCASE("short record names its index") {
    TempFile f("short.ndjson");
    std::ofstream out(f.path);
    out << trajectory_to_json(make_traj(0, 30, 0, 1, 0, 2)).dump() << "\n";
    auto t = make_traj(0, 30, 0, 1, 0, 2);
    t.steps.pop_back();
    out << trajectory_to_json(t).dump() << "\n";
    out.close();
    const auto msg = message_of<ValidationError>([&] { load_dataset(f.path, schema); });
    CHECK(msg.find("record 1") != std::string::npos);
  }
  SUBCASE("out-of-range action rejected") {
    auto t = make_traj(0, 30, 5, 1, 0, 2);
    CHECK_THROWS_AS(validate_record(schema, t, 0), ValidationError);
  }
  SUBCASE("non-finite value rejected") {
    auto t = make_traj(0, 30, 0, std::numeric_limits<double>::quiet_NaN(), 0, 2);
    CHECK_THROWS_AS(validate_record(schema, t, 0), ValidationError);
  }
}

TEST_CASE("split respects the fraction exactly") {
  const auto schema = demo_schema();
  TrajectoryDataset d;
  d.schema = schema;
  for (int i = 0; i < 100; ++i) d.records.push_back(make_traj(i % 2, i, i % 2, i, 0, -i));

  SUBCASE("fraction zero and one") {
    auto [h0, m0] = split_dataset(d, 0.0, 7);
    CHECK(h0.records.empty());
    CHECK(m0.records.size() == 100);
    auto [h1, m1] = split_dataset(d, 1.0, 7);
    CHECK(h1.records.size() == 100);
    CHECK(m1.records.empty());
  }
  SUBCASE("five percent of one hundred") {
    auto [held, main] = split_dataset(d, 0.05, 7);
    CHECK(held.records.size() == 5);
    CHECK(main.records.size() == 95);
  }
  SUBCASE("deterministic and union preserving") {
    auto [h1, m1] = split_dataset(d, 0.3, 11);
    auto [h2, m2] = split_dataset(d, 0.3, 11);
    CHECK(h1.records.size() == h2.records.size());
    for (std::size_t i = 0; i < h1.records.size(); ++i)
      CHECK(h1.records[i].x0 == h2.records[i].x0);

    std::multiset<double> before, after;
    for (const auto& r : d.records) before.insert(r.x0[1]);
    for (const auto& r : h1.records) after.insert(r.x0[1]);
    for (const auto& r : m1.records) after.insert(r.x0[1]);
    CHECK(before == after);
  }
  SUBCASE("different seeds move the boundary") {
    bool any_differ = false;
    auto [base, rest] = split_dataset(d, 0.3, 0);
    for (std::uint64_t s = 1; s <= 5 && !any_differ; ++s) {
      auto [h, m] = split_dataset(d, 0.3, s);
      for (std::size_t i = 0; i < h.records.size(); ++i)
        if (h.records[i].x0 != base.records[i].x0) any_differ = true;
    }
    CHECK(any_differ);
  }
  SUBCASE("fraction out of range") {
    CHECK_THROWS_AS(split_dataset(d, -0.1, 0), ValidationError);
    CHECK_THROWS_AS(split_dataset(d, 1.5, 0), ValidationError);
  }
}

namespace {

TrajectoryDataset dose_dataset(const std::vector<double>& doses) {
  FeatureSchema s;
  s.horizon = 1;
  s.step_features = {{"dose", FeatureKind::Continuous, 0}};
  s.action_cardinalities = {1};
  TrajectoryDataset d;
  d.schema = s;
  for (double v : doses) {
    ObservationalTrajectory t;
    t.steps = {{0, {v}}};
    d.records.push_back(std::move(t));
  }
  return d;
}

}  // namespace

TEST_CASE("dose binning puts quartile edges over positive doses") {
  const auto d = dose_dataset({0, 10, 20, 30, 40});
  const auto b = fit_action_binning(d, {"dose"});
  REQUIRE(b.dims.size() == 1);
  CHECK(b.dims[0].edges[0] == doctest::Approx(17.5));
  CHECK(b.dims[0].edges[1] == doctest::Approx(25.0));
  CHECK(b.dims[0].edges[2] == doctest::Approx(32.5));
  CHECK(b.num_actions() == 5);

  CHECK(dose_bin(b.dims[0], 0.0) == 0);  // zero dose is its own bin
  CHECK(dose_bin(b.dims[0], 10.0) == 1);
  CHECK(dose_bin(b.dims[0], 20.0) == 2);
  CHECK(dose_bin(b.dims[0], 30.0) == 3);
  CHECK(dose_bin(b.dims[0], 40.0) == 4);

  // Bins are monotone in the dose.
  int prev = 0;
  for (double v = 0.0; v <= 50.0; v += 0.5) {
    const int bin = dose_bin(b.dims[0], v);
    CHECK(bin >= prev);
    prev = bin;
  }

  // Representatives fall inside their own bins.
  for (int k = 0; k < 5; ++k)
    CHECK(dose_bin(b.dims[0], b.dims[0].representatives[static_cast<std::size_t>(k)]) == k);
}

TEST_CASE("binning degenerates are stage failures") {
  CHECK_THROWS_AS(fit_action_binning(dose_dataset({0, 0, 0}), {"dose"}), StageError);
  CHECK_THROWS_AS(fit_action_binning(dose_dataset({0, 5, 5, 5, 5}), {"dose"}), StageError);
  CHECK_THROWS_AS(fit_action_binning(dose_dataset({1, 2, 3}), {"nope"}), ValidationError);
  CHECK_THROWS_AS(fit_action_binning(dose_dataset({-1, 2, 3}), {"dose"}), ValidationError);
}

TEST_CASE("combined action index is row major") {
  const auto d = dose_dataset({0, 10, 20, 30, 40});
  auto b = fit_action_binning(d, {"dose"});
  b.dims.push_back(b.dims[0]);  // two identical dimensions
  CHECK(b.num_actions() == 25);
  CHECK(action_index(b, std::vector<double>{0.0, 0.0}) == 0);
  CHECK(action_index(b, std::vector<double>{0.0, 40.0}) == 4);
  CHECK(action_index(b, std::vector<double>{40.0, 0.0}) == 20);
  CHECK(action_index(b, std::vector<double>{20.0, 30.0}) == 13);
  CHECK_THROWS_AS(action_index(b, std::vector<double>{1.0}), ValidationError);

  // representative_doses inverts action_index on representatives.
  for (int a : {0, 7, 13, 24}) {
    const auto doses = representative_doses(b, a);
    CHECK(action_index(b, doses) == a);
  }
  CHECK_THROWS_AS(representative_doses(b, 25), ValidationError);
}

TEST_CASE("apply_action_binning rewrites actions and cardinalities") {
  auto d = dose_dataset({0, 10, 20, 30, 40});
  const auto b = fit_action_binning(d, {"dose"});
  const auto binned = apply_action_binning(d, b);
  CHECK(binned.schema.action_cardinalities == std::vector<int>{5});
  std::vector<int> actions;
  for (const auto& t : binned.records) actions.push_back(t.steps[0].action);
  CHECK(actions == std::vector<int>{0, 1, 2, 3, 4});

  const auto j = binning_to_json(b);
  const auto back = binning_from_json(j);
  CHECK(back.dims[0].edges == b.dims[0].edges);
  CHECK(back.dims[0].representatives == b.dims[0].representatives);
  auto bad = j;
  bad["dims"][0]["edges"] = std::vector<double>{1.0};
  CHECK_THROWS_AS(binning_from_json(bad), ValidationError);
}
