// Command-line front end for the twin falsification pipeline.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "twincheck/binning.hpp"
#include "twincheck/bounds.hpp"
#include "twincheck/builtin_twins.hpp"
#include "twincheck/errors.hpp"
#include "twincheck/hypothesis_gen.hpp"
#include "twincheck/report.hpp"
#include "twincheck/stats.hpp"
#include "twincheck/subprocess_twin.hpp"
#include "twincheck/testing.hpp"
#include "twincheck/world.hpp"

namespace {

using namespace twincheck;

std::vector<int> parse_actions(const std::string& s) {
  std::vector<int> a;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) a.push_back(std::stoi(tok));
  if (a.empty()) throw ValidationError("empty action sequence");
  return a;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  return v;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << content;
}

TrajectoryDataset load_obs(const std::string& data, const std::string& schema) {
  return load_dataset(data, load_schema(schema));
}

// Shared test/multiplicity flags; a JSON config file provides defaults and
// every flag overrides it.
struct CommonOpts {
  std::string config_path;
  std::string method;
  double alpha = -1.0;
  double fwer = -1.0;
  long bootstrap_samples = -1;
  long min_bootstrap_n = -1;
  long long seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON config file");
  cmd->add_option("--method", o.method)->check(CLI::IsMember({"hoeffding", "bootstrap"}));
  cmd->add_option("--alpha", o.alpha);
  cmd->add_option("--fwer", o.fwer);
  cmd->add_option("--bootstrap-samples", o.bootstrap_samples);
  cmd->add_option("--min-bootstrap-n", o.min_bootstrap_n);
  cmd->add_option("--seed", o.seed);
}

AssessmentConfig make_config(const CommonOpts& o) {
  AssessmentConfig cfg;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ValidationError("cannot open config file: " + o.config_path);
    nlohmann::json j;
    in >> j;
    cfg = assessment_config_from_json(j);
  }
  if (!o.method.empty())
    cfg.test.method = o.method == "bootstrap" ? TestMethod::Bootstrap : TestMethod::Hoeffding;
  if (o.alpha >= 0.0) cfg.test.alpha = o.alpha;
  if (o.fwer >= 0.0) cfg.fwer = o.fwer;
  if (o.bootstrap_samples >= 0) cfg.test.bootstrap_samples = o.bootstrap_samples;
  if (o.min_bootstrap_n >= 0) cfg.test.min_bootstrap_n = o.min_bootstrap_n;
  if (o.seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(o.seed);
    cfg.test.seed = cfg.seed;
  }
  return cfg;
}

void print_table(const AssessmentReport& rep) {
  std::cout << "quantity hypotheses tested rejected_lo rejected_up\n";
  for (const auto& row : rep.table)
    std::cout << row.quantity << " " << row.hypotheses << " " << row.tested << " "
              << row.rejected_lo << " " << row.rejected_up << "\n";
}

int run_demo(const std::string& out_dir, std::uint64_t seed) {
  // Observational data come from a variant braking world whose behavioural
  // policy is strongly tied to the hidden pad age; the naive twin is frozen on
  // the base world's observational conditionals and overestimates the
  // stopping rate, which the upper bound catches.
  auto run = [&](const std::string& twin_world, const std::string& mode, const char* tag) {
    AssessmentConfig cfg;
    cfg.world = "brake-pad-high-propensity";
    cfg.world_samples = 10000;
    cfg.twin_world = twin_world;
    cfg.twin_mode = mode;
    cfg.twin_samples = 5000;
    cfg.generation.median_split = false;  // binary outcome, splits would collapse it
    cfg.seed = seed;
    cfg.test.seed = seed;
    auto rep = run_assessment(cfg);
    std::cout << "[" << tag << " twin]\n";
    print_table(rep);
    std::cout << "total rejections: " << rep.total_rejections() << "\n\n";
    if (!out_dir.empty()) {
      write_file(out_dir + "/demo_" + tag + ".json", report_to_json(rep).dump(2) + "\n");
      write_file(out_dir + "/demo_" + tag + ".csv", report_to_csv(rep));
    }
    return rep;
  };

  run("brake-pad-high-propensity", "correct", "correct");
  const auto blind = run("brake-pad", "blind", "blind");
  if (blind.total_rejections() < 1) {
    std::cerr << "demo: expected the naive twin to be falsified\n";
    return 3;
  }
  std::cout << "naive twin falsified; correct twin retained\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Falsifies digital twins against observational trajectories via causal bounds"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a dataset or sample one from a world");
  std::string in_data, in_schema, in_world, in_out, in_out_schema;
  long in_n = 5000;
  long long in_seed = 0;
  ingest->add_option("--data", in_data);
  ingest->add_option("--schema", in_schema);
  ingest->add_option("--world", in_world, "built-in world name or world JSON path");
  ingest->add_option("--n", in_n);
  ingest->add_option("--seed", in_seed);
  ingest->add_option("--out", in_out)->required();
  ingest->add_option("--out-schema", in_out_schema);

  // split
  auto* split = app.add_subcommand("split", "Disjoint held-out/main partition");
  std::string sp_data, sp_schema, sp_held, sp_main;
  double sp_fraction = 0.5;
  long long sp_seed = 0;
  split->add_option("--data", sp_data)->required();
  split->add_option("--schema", sp_schema)->required();
  split->add_option("--fraction", sp_fraction);
  split->add_option("--seed", sp_seed);
  split->add_option("--out-held", sp_held)->required();
  split->add_option("--out-main", sp_main)->required();

  // bin-actions
  auto* bin = app.add_subcommand("bin-actions", "Fit dose bins and rewrite actions");
  std::string bn_data, bn_schema, bn_columns, bn_out_binning, bn_out_data;
  bin->add_option("--data", bn_data)->required();
  bin->add_option("--schema", bn_schema)->required();
  bin->add_option("--columns", bn_columns, "comma-separated raw dose features")->required();
  bin->add_option("--out-binning", bn_out_binning)->required();
  bin->add_option("--out-data", bn_out_data);

  // gen-hypotheses
  auto* gen = app.add_subcommand("gen-hypotheses", "Generate hypotheses from a held-out split");
  std::string gh_data, gh_schema, gh_quantities, gh_sex, gh_age, gh_out;
  double gh_qlo = 0.2, gh_qup = 0.8;
  bool gh_pooled = false, gh_no_split = false;
  gen->add_option("--data", gh_data)->required();
  gen->add_option("--schema", gh_schema)->required();
  gen->add_option("--quantities", gh_quantities, "comma-separated step features");
  gen->add_option("--q-lo", gh_qlo);
  gen->add_option("--q-up", gh_qup);
  gen->add_option("--sex-feature", gh_sex);
  gen->add_option("--age-feature", gh_age);
  gen->add_flag("--pooled-median", gh_pooled);
  gen->add_flag("--no-median-split", gh_no_split,
                "drop the per-step median factor (binary quantities)");
  gen->add_option("--out", gh_out)->required();

  // gen-twin-data
  auto* gtd = app.add_subcommand("gen-twin-data", "Roll twin sessions under fixed actions");
  std::string gt_data, gt_schema, gt_actions, gt_world, gt_mode = "correct", gt_binning, gt_out;
  std::vector<std::string> gt_command;
  double gt_delta = 0.0, gt_timeout = 30.0;
  long gt_m = 0;
  long long gt_seed = 0;
  int gt_parallel = 1;
  gtd->add_option("--data", gt_data)->required();
  gtd->add_option("--schema", gt_schema)->required();
  gtd->add_option("--actions", gt_actions, "comma-separated action indices")->required();
  gtd->add_option("--world", gt_world, "world twin source");
  gtd->add_option("--mode", gt_mode)->check(CLI::IsMember({"correct", "shifted", "blind"}));
  gtd->add_option("--delta", gt_delta);
  gtd->add_option("--twin-command", gt_command, "external twin argv");
  gtd->add_option("--timeout", gt_timeout);
  gtd->add_option("--parallelism", gt_parallel);
  gtd->add_option("--binning", gt_binning, "binning JSON for representative doses");
  gtd->add_option("--m", gt_m, "sessions to run (default: all of --data)");
  gtd->add_option("--seed", gt_seed);
  gtd->add_option("--out", gt_out)->required();

  // test
  auto* test = app.add_subcommand("test", "Test hypotheses and apply Holm");
  std::string ts_data, ts_schema, ts_hyp, ts_out;
  std::vector<std::string> ts_twin;
  CommonOpts ts_common;
  test->add_option("--data", ts_data)->required();
  test->add_option("--schema", ts_schema)->required();
  test->add_option("--hypotheses", ts_hyp)->required();
  test->add_option("--twin-data", ts_twin, "twin dataset files (one per action sequence)")
      ->required();
  add_common(test, ts_common);
  test->add_option("--out", ts_out);

  // report
  auto* report = app.add_subcommand("report", "Run the full pipeline from a config");
  CommonOpts rp_common;
  std::string rp_out_json, rp_out_csv;
  add_common(report, rp_common);
  report->add_option("--out-json", rp_out_json);
  report->add_option("--out-csv", rp_out_csv);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Sensitivity of rejections to interval width");
  CommonOpts sw_common;
  std::string sw_deltas = "-0.5,-0.25,0,0.25,0.5,1.0", sw_out;
  add_common(sweep, sw_common);
  sweep->add_option("--deltas", sw_deltas, "comma-separated relative widenings");
  sweep->add_option("--out", sw_out);

  // demo
  auto* demo = app.add_subcommand("demo", "End-to-end braking example");
  std::string dm_out_dir;
  long long dm_seed = 7;
  demo->add_option("--out-dir", dm_out_dir);
  demo->add_option("--seed", dm_seed);

  try {
    app.parse(argc, argv);

    if (*ingest) {
      TrajectoryDataset d;
      if (!in_world.empty()) {
        d = sample_observational(resolve_world(in_world), in_n,
                                 static_cast<std::uint64_t>(in_seed));
      } else {
        if (in_data.empty() || in_schema.empty())
          throw ValidationError("ingest needs --world or --data plus --schema");
        d = load_obs(in_data, in_schema);
      }
      save_dataset(d, in_out);
      if (!in_out_schema.empty())
        write_file(in_out_schema, schema_to_json(d.schema).dump(2) + "\n");
      std::cout << "records: " << d.records.size() << "\n";
      return 0;
    }
    if (*split) {
      const auto d = load_obs(sp_data, sp_schema);
      const auto [held, main_part] =
          split_dataset(d, sp_fraction, static_cast<std::uint64_t>(sp_seed));
      save_dataset(held, sp_held);
      save_dataset(main_part, sp_main);
      std::cout << "held-out: " << held.records.size() << ", main: " << main_part.records.size()
                << "\n";
      return 0;
    }
    if (*bin) {
      auto d = load_obs(bn_data, bn_schema);
      std::vector<std::string> cols;
      std::stringstream ss(bn_columns);
      std::string tok;
      while (std::getline(ss, tok, ',')) cols.push_back(tok);
      const auto binning = fit_action_binning(d, cols);
      write_file(bn_out_binning, binning_to_json(binning).dump(2) + "\n");
      if (!bn_out_data.empty()) save_dataset(apply_action_binning(d, binning), bn_out_data);
      std::cout << "actions per step: " << binning.num_actions() << "\n";
      return 0;
    }
    if (*gen) {
      const auto d = load_obs(gh_data, gh_schema);
      GenerationConfig cfg;
      if (!gh_quantities.empty()) {
        std::stringstream ss(gh_quantities);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.quantities.push_back(tok);
      } else {
        for (const auto& f : d.schema.step_features) cfg.quantities.push_back(f.name);
      }
      cfg.q_lo = gh_qlo;
      cfg.q_up = gh_qup;
      cfg.sex_feature = gh_sex;
      cfg.age_feature = gh_age;
      cfg.pooled_median = gh_pooled;
      cfg.median_split = !gh_no_split;
      const auto specs = generate_hypotheses(d, cfg);
      save_hypotheses(specs, gh_out);
      std::cout << "hypotheses: " << specs.size() << "\n";
      return 0;
    }
    if (*gtd) {
      const auto d = load_obs(gt_data, gt_schema);
      const auto actions = parse_actions(gt_actions);
      std::unique_ptr<TwinFactory> factory;
      if (!gt_command.empty()) {
        SubprocessTwinOptions opts;
        opts.argv = gt_command;
        opts.timeout_seconds = gt_timeout;
        factory = std::make_unique<SubprocessTwinFactory>(std::move(opts));
      } else if (!gt_world.empty()) {
        const TwinMode mode = gt_mode == "shifted"  ? TwinMode::Shifted
                              : gt_mode == "blind" ? TwinMode::PropensityBlind
                                                   : TwinMode::Correct;
        factory = std::make_unique<WorldTwinFactory>(resolve_world(gt_world), mode, gt_delta);
      } else {
        throw ValidationError("gen-twin-data needs --world or --twin-command");
      }
      TwinGenOptions opts;
      ActionBinning binning;
      if (!gt_binning.empty()) {
        std::ifstream in(gt_binning);
        if (!in) throw ValidationError("cannot open binning file: " + gt_binning);
        nlohmann::json j;
        in >> j;
        binning = binning_from_json(j);
        opts.binning = &binning;
      }
      opts.parallelism = gt_parallel;
      opts.keep_going_on_failure = !gt_command.empty();
      const long m = gt_m > 0 ? gt_m : static_cast<long>(d.records.size());
      const auto twin =
          generate_twin_dataset(d, actions, *factory, m, static_cast<std::uint64_t>(gt_seed), opts);
      save_twin_dataset(twin, gt_out);
      std::cout << "twin records: " << twin.records.size()
                << ", failed sessions: " << twin.failed_sessions.size() << "\n";
      return 0;
    }
    if (*test) {
      const auto cfg = make_config(ts_common);
      const auto d = load_obs(ts_data, ts_schema);
      const auto specs = [&] {
        auto s = load_hypotheses(ts_hyp);
        std::sort(s.begin(), s.end(),
                  [](const HypothesisSpec& a, const HypothesisSpec& b) { return a.id < b.id; });
        return s;
      }();
      std::map<std::vector<int>, TwinDataset> twins;
      for (const auto& path : ts_twin) {
        auto t = load_twin_dataset(path, d.schema);
        twins[t.actions] = std::move(t);
      }
      std::vector<TestOutcome> outcomes;
      std::vector<double> ps;
      for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto it = twins.find(specs[i].actions);
        if (it == twins.end())
          throw ValidationError("no twin dataset for the actions of spec " + specs[i].id);
        TestConfig tc = cfg.test;
        tc.seed = mix_seed(cfg.test.seed, 1000 + i);
        outcomes.push_back(test_hypothesis(d, it->second, specs[i], tc));
      }
      std::vector<std::size_t> tested;
      for (std::size_t i = 0; i < outcomes.size(); ++i)
        if (outcomes[i].status == TestStatus::Tested) {
          tested.push_back(i);
          ps.push_back(outcomes[i].p_lo);
          ps.push_back(outcomes[i].p_up);
        }
      nlohmann::json out = nlohmann::json::array();
      std::vector<bool> rej(ps.size(), false);
      if (!ps.empty()) {
        const auto holm = holm_bonferroni(ps, cfg.fwer);
        rej = holm.rejected;
      }
      long rejections = 0;
      for (std::size_t k = 0; k < tested.size(); ++k) {
        const auto& o = outcomes[tested[k]];
        const bool rlo = rej[2 * k], rup = rej[2 * k + 1];
        rejections += (rlo ? 1 : 0) + (rup ? 1 : 0);
        out.push_back({{"id", o.spec_id},
                       {"p_lo", o.p_lo},
                       {"p_up", o.p_up},
                       {"rejected_lo", rlo},
                       {"rejected_up", rup}});
      }
      for (const auto& o : outcomes)
        if (o.status != TestStatus::Tested)
          out.push_back({{"id", o.spec_id}, {"status", to_string(o.status)}});
      if (!ts_out.empty()) write_file(ts_out, out.dump(2) + "\n");
      std::cout << "tested: " << tested.size() << "/" << outcomes.size()
                << ", rejections: " << rejections << "\n";
      return 0;
    }
    if (*report) {
      const auto cfg = make_config(rp_common);
      const auto rep = run_assessment(cfg);
      print_table(rep);
      std::cout << "total rejections: " << rep.total_rejections() << "\n";
      if (!rp_out_json.empty()) write_file(rp_out_json, report_to_json(rep).dump(2) + "\n");
      if (!rp_out_csv.empty()) write_file(rp_out_csv, report_to_csv(rep));
      return 0;
    }
    if (*sweep) {
      AssessmentConfig cfg = make_config(sw_common);
      // Rebuild the base run's inputs, then rerun testing per delta.
      TrajectoryDataset data;
      if (!cfg.world.empty()) {
        data = sample_observational(resolve_world(cfg.world), cfg.world_samples,
                                    mix_seed(cfg.seed, 1));
      } else {
        data = load_obs(cfg.dataset_path, cfg.schema_path);
      }
      auto [d0, d1] = split_dataset(data, cfg.held_out_fraction, mix_seed(cfg.seed, 2));
      auto specs = [&] {
        if (!cfg.hypotheses_path.empty()) return load_hypotheses(cfg.hypotheses_path);
        GenerationConfig gen_cfg = cfg.generation;
        if (gen_cfg.quantities.empty())
          for (const auto& f : d0.schema.step_features) gen_cfg.quantities.push_back(f.name);
        return generate_hypotheses(d0, gen_cfg);
      }();
      std::sort(specs.begin(), specs.end(),
                [](const HypothesisSpec& a, const HypothesisSpec& b) { return a.id < b.id; });
      auto factory = make_twin_factory(cfg);
      std::map<std::vector<int>, TwinDataset> twins;
      std::size_t k = 0;
      for (const auto& spec : specs) {
        if (twins.contains(spec.actions)) continue;
        const long avail = static_cast<long>(d1.records.size());
        const long want = cfg.twin_samples > 0 ? std::min(cfg.twin_samples, avail) : avail;
        twins.emplace(spec.actions, generate_twin_dataset(d1, spec.actions, *factory, want,
                                                          mix_seed(cfg.seed, 100 + k), {}));
        ++k;
      }
      const auto rows =
          sensitivity_sweep(d1, twins, specs, cfg.test, cfg.fwer, parse_doubles(sw_deltas));
      nlohmann::json out = nlohmann::json::array();
      std::cout << "delta tested dropped rejections\n";
      for (const auto& row : rows) {
        std::cout << row.delta << " " << row.tested << " " << row.specs_dropped << " "
                  << (row.skipped ? std::string("skipped") : std::to_string(row.rejections))
                  << "\n";
        out.push_back({{"delta", row.delta},
                       {"skipped", row.skipped},
                       {"specs_dropped", row.specs_dropped},
                       {"tested", row.tested},
                       {"rejections", row.rejections}});
      }
      if (!sw_out.empty()) write_file(sw_out, out.dump(2) + "\n");
      return 0;
    }
    if (*demo) return run_demo(dm_out_dir, static_cast<std::uint64_t>(dm_seed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "stage failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
