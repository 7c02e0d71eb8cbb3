#include "twincheck/report.hpp"

#include <algorithm>
#include <memory>
#include <sstream>

#include "twincheck/binning.hpp"
#include "twincheck/bounds.hpp"
#include "twincheck/builtin_twins.hpp"
#include "twincheck/errors.hpp"
#include "twincheck/stats.hpp"
#include "twincheck/subprocess_twin.hpp"

namespace twincheck {

namespace {

template <typename F>
auto run_stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(std::string("stage ") + name + ": " + e.what());
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string dataset_digest(const TrajectoryDataset& d) {
  std::uint64_t h = fnv1a(schema_to_json(d.schema).dump());
  for (const auto& r : d.records) h ^= fnv1a(trajectory_to_json(r).dump()) + 0x9e3779b97f4a7c15ull;
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

TwinMode parse_twin_mode(const std::string& s) {
  if (s == "correct") return TwinMode::Correct;
  if (s == "shifted") return TwinMode::Shifted;
  if (s == "blind") return TwinMode::PropensityBlind;
  throw ValidationError("unknown twin mode \"" + s + "\" (correct | shifted | blind)");
}

nlohmann::json outcome_to_json(const TestOutcome& o, bool rej_lo, bool rej_up) {
  return {{"id", o.spec_id},
          {"label", o.label},
          {"status", to_string(o.status)},
          {"method", to_string(o.method)},
          {"antecedent_ok", o.antecedent_ok},
          {"n", o.n},
          {"n_hat", o.n_hat},
          {"p_lo", o.p_lo},
          {"p_up", o.p_up},
          {"alpha", o.alpha},
          {"q_lo_alpha", o.q_lo_alpha},
          {"q_up_alpha", o.q_up_alpha},
          {"qhat_lo_alpha", o.qhat_lo_alpha},
          {"qhat_up_alpha", o.qhat_up_alpha},
          {"mu_lo", o.obs.mu_lo},
          {"mu_up", o.obs.mu_up},
          {"mu_hat", o.twin.mu_hat},
          {"propensity_hat", o.obs.propensity_hat},
          {"tightness_hat", o.obs.tightness_hat},
          {"rejected_lo", rej_lo},
          {"rejected_up", rej_up}};
}

nlohmann::json histogram_json(std::vector<double> vals, bool truncate) {
  nlohmann::json h;
  if (vals.empty()) {
    h["counts"] = nlohmann::json::array();
    h["edges"] = nlohmann::json::array();
    return h;
  }
  std::sort(vals.begin(), vals.end());
  double lo = vals.front(), hi = vals.back();
  if (truncate && vals.size() > 1) {
    lo = quantile_sorted(vals, 0.025);
    hi = quantile_sorted(vals, 0.975);
  }
  constexpr int kBins = 20;
  std::vector<long> counts(kBins, 0);
  std::vector<double> edges(kBins + 1);
  const double width = hi > lo ? (hi - lo) / kBins : 1.0;
  for (int b = 0; b <= kBins; ++b) edges[static_cast<std::size_t>(b)] = lo + width * b;
  for (double v : vals) {
    if (v < lo || v > hi) continue;
    int b = static_cast<int>((v - lo) / width);
    b = std::clamp(b, 0, kBins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  h["counts"] = counts;
  h["edges"] = edges;
  return h;
}

// Raw (unclipped) outcome values on the action-agreeing in-region subset.
void collect_obs_raw(const TrajectoryDataset& d, const HypothesisSpec& spec,
                     std::vector<double>& out) {
  for (const auto& r : d.records) {
    bool agree = true;
    for (int s = 0; s < spec.t && agree; ++s)
      agree = r.steps[static_cast<std::size_t>(s)].action == spec.actions[static_cast<std::size_t>(s)];
    if (!agree) continue;
    std::vector<std::vector<double>> xs;
    xs.reserve(r.steps.size());
    for (const auto& st : r.steps) xs.push_back(st.x);
    if (!region_contains_prefix(spec.region, d.schema, r.x0, xs, spec.t)) continue;
    out.push_back(spec.outcome.raw_value(d.schema, xs));
  }
}

void collect_twin_raw(const TwinDataset& d, const HypothesisSpec& spec, std::vector<double>& out) {
  for (const auto& r : d.records) {
    if (!region_contains_prefix(spec.region, d.schema, r.x0, r.steps, spec.t)) continue;
    out.push_back(spec.outcome.raw_value(d.schema, r.steps));
  }
}

}  // namespace

AssessmentConfig assessment_config_from_json(const nlohmann::json& j) {
  AssessmentConfig c;
  c.dataset_path = j.value("dataset", std::string{});
  c.schema_path = j.value("schema", std::string{});
  c.world = j.value("world", std::string{});
  c.world_samples = j.value("world_samples", c.world_samples);
  c.twin_world = j.value("twin_world", std::string{});
  c.twin_mode = j.value("twin_mode", c.twin_mode);
  c.twin_delta = j.value("twin_delta", c.twin_delta);
  c.twin_command = j.value("twin_command", std::vector<std::string>{});
  c.twin_timeout_seconds = j.value("twin_timeout_seconds", c.twin_timeout_seconds);
  c.twin_parallelism = j.value("twin_parallelism", c.twin_parallelism);
  c.twin_samples = j.value("twin_samples", c.twin_samples);
  c.hypotheses_path = j.value("hypotheses", std::string{});
  c.generation.quantities = j.value("quantities", std::vector<std::string>{});
  c.generation.q_lo = j.value("q_lo", c.generation.q_lo);
  c.generation.q_up = j.value("q_up", c.generation.q_up);
  c.generation.sex_feature = j.value("sex_feature", std::string{});
  c.generation.age_feature = j.value("age_feature", std::string{});
  c.generation.pooled_median = j.value("pooled_median", false);
  c.generation.median_split = j.value("median_split", true);
  c.held_out_fraction = j.value("held_out_fraction", c.held_out_fraction);
  c.raw_dose_columns = j.value("raw_dose_columns", std::vector<std::string>{});
  const std::string method = j.value("method", std::string{"hoeffding"});
  if (method == "hoeffding") c.test.method = TestMethod::Hoeffding;
  else if (method == "bootstrap") c.test.method = TestMethod::Bootstrap;
  else throw ValidationError("unknown method \"" + method + "\"");
  c.test.alpha = j.value("alpha", c.test.alpha);
  c.test.bootstrap_samples = j.value("bootstrap_samples", c.test.bootstrap_samples);
  c.test.min_bootstrap_n = j.value("min_bootstrap_n", c.test.min_bootstrap_n);
  const std::string variant = j.value("bootstrap_variant", std::string{"reverse-percentile"});
  if (variant == "reverse-percentile") c.test.bootstrap_variant = BootstrapVariant::ReversePercentile;
  else if (variant == "percentile") c.test.bootstrap_variant = BootstrapVariant::Percentile;
  else throw ValidationError("unknown bootstrap variant \"" + variant + "\"");
  c.fwer = j.value("fwer", c.fwer);
  c.per_quantity_families = j.value("per_quantity_families", false);
  c.truncate_histograms = j.value("truncate_histograms", true);
  c.seed = j.value("seed", c.seed);
  c.test.seed = j.value("test_seed", c.seed);
  return c;
}

nlohmann::json assessment_config_to_json(const AssessmentConfig& c) {
  return {{"dataset", c.dataset_path},
          {"schema", c.schema_path},
          {"world", c.world},
          {"world_samples", c.world_samples},
          {"twin_world", c.twin_world},
          {"twin_mode", c.twin_mode},
          {"twin_delta", c.twin_delta},
          {"twin_command", c.twin_command},
          {"twin_timeout_seconds", c.twin_timeout_seconds},
          {"twin_parallelism", c.twin_parallelism},
          {"twin_samples", c.twin_samples},
          {"hypotheses", c.hypotheses_path},
          {"quantities", c.generation.quantities},
          {"q_lo", c.generation.q_lo},
          {"q_up", c.generation.q_up},
          {"sex_feature", c.generation.sex_feature},
          {"age_feature", c.generation.age_feature},
          {"pooled_median", c.generation.pooled_median},
          {"median_split", c.generation.median_split},
          {"held_out_fraction", c.held_out_fraction},
          {"raw_dose_columns", c.raw_dose_columns},
          {"method", to_string(c.test.method)},
          {"alpha", c.test.alpha},
          {"bootstrap_samples", c.test.bootstrap_samples},
          {"min_bootstrap_n", c.test.min_bootstrap_n},
          {"bootstrap_variant", c.test.bootstrap_variant == BootstrapVariant::Percentile
                                    ? "percentile"
                                    : "reverse-percentile"},
          {"fwer", c.fwer},
          {"per_quantity_families", c.per_quantity_families},
          {"truncate_histograms", c.truncate_histograms},
          {"seed", c.seed},
          {"test_seed", c.test.seed}};
}

DiscreteWorld resolve_world(const std::string& name) {
  if (name == "brake-pad") return brake_pad_world();
  if (name == "brake-pad-high-propensity") return brake_pad_high_propensity_world();
  if (name == "confounded-chain") return confounded_chain_world();
  if (name == "deterministic-chain") return deterministic_chain_world();
  if (name.rfind("random:", 0) == 0)
    return random_world(std::stoull(name.substr(7)));
  return load_world(name);
}

std::unique_ptr<TwinFactory> make_twin_factory(const AssessmentConfig& cfg) {
  if (!cfg.twin_command.empty()) {
    SubprocessTwinOptions opts;
    opts.argv = cfg.twin_command;
    opts.timeout_seconds = cfg.twin_timeout_seconds;
    return std::make_unique<SubprocessTwinFactory>(std::move(opts));
  }
  const std::string source = cfg.twin_world.empty() ? cfg.world : cfg.twin_world;
  if (source.empty())
    throw ValidationError("no twin source: set twin_command or twin_world (or world)");
  return std::make_unique<WorldTwinFactory>(resolve_world(source), parse_twin_mode(cfg.twin_mode),
                                            cfg.twin_delta);
}

long AssessmentReport::total_rejections() const {
  long r = 0;
  for (const auto& row : table) r += row.rejected_lo + row.rejected_up;
  return r;
}

AssessmentReport run_assessment(const AssessmentConfig& cfg) {
  AssessmentReport rep;

  auto data = run_stage("ingest", [&] {
    if (!cfg.world.empty()) {
      const auto w = resolve_world(cfg.world);
      return sample_observational(w, cfg.world_samples, mix_seed(cfg.seed, 1));
    }
    if (cfg.dataset_path.empty() || cfg.schema_path.empty())
      throw ValidationError("config needs either a world or dataset + schema paths");
    return load_dataset(cfg.dataset_path, load_schema(cfg.schema_path));
  });

  auto [d0, d1] = run_stage("split", [&] {
    return split_dataset(data, cfg.held_out_fraction, mix_seed(cfg.seed, 2));
  });

  ActionBinning binning;
  const bool binned = !cfg.raw_dose_columns.empty();
  if (binned) {
    run_stage("bin-actions", [&] {
      binning = fit_action_binning(d0, cfg.raw_dose_columns);
      d0 = apply_action_binning(d0, binning);
      d1 = apply_action_binning(d1, binning);
      return 0;
    });
  }

  auto specs = run_stage("gen-hypotheses", [&] {
    if (!cfg.hypotheses_path.empty()) return load_hypotheses(cfg.hypotheses_path);
    GenerationConfig gen = cfg.generation;
    if (gen.quantities.empty())
      for (const auto& f : d0.schema.step_features) gen.quantities.push_back(f.name);
    return generate_hypotheses(d0, gen);
  });
  std::sort(specs.begin(), specs.end(),
            [](const HypothesisSpec& a, const HypothesisSpec& b) { return a.id < b.id; });

  auto twins = run_stage("gen-twin-data", [&] {
    std::map<std::vector<int>, TwinDataset> m;
    auto factory = make_twin_factory(cfg);
    TwinGenOptions opts;
    if (binned) opts.binning = &binning;
    opts.parallelism = cfg.twin_parallelism;
    opts.keep_going_on_failure = !cfg.twin_command.empty();
    std::size_t k = 0;
    for (const auto& spec : specs) {
      if (m.contains(spec.actions)) continue;
      const long avail = static_cast<long>(d1.records.size());
      const long want = cfg.twin_samples > 0 ? std::min(cfg.twin_samples, avail) : avail;
      m.emplace(spec.actions, generate_twin_dataset(d1, spec.actions, *factory, want,
                                                    mix_seed(cfg.seed, 100 + k), opts));
      ++k;
    }
    return m;
  });

  rep.outcomes = run_stage("test", [&] {
    std::vector<TestOutcome> outs;
    outs.reserve(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
      TestConfig tc = cfg.test;
      tc.seed = mix_seed(cfg.test.seed, 1000 + i);
      outs.push_back(test_hypothesis(d1, twins.at(specs[i].actions), specs[i], tc));
    }
    return outs;
  });

  // One Holm family per quantity when configured, otherwise a single joint
  // family; each tested outcome contributes its lower and upper p-value.
  rep.rejected_lo.assign(rep.outcomes.size(), false);
  rep.rejected_up.assign(rep.outcomes.size(), false);
  run_stage("multiplicity", [&] {
    std::map<std::string, std::vector<std::pair<std::size_t, bool>>> families;
    for (std::size_t i = 0; i < rep.outcomes.size(); ++i) {
      if (rep.outcomes[i].status != TestStatus::Tested) continue;
      const std::string key = cfg.per_quantity_families ? rep.outcomes[i].label : std::string{};
      families[key].push_back({i, false});
      families[key].push_back({i, true});
    }
    for (const auto& [key, members] : families) {
      std::vector<double> ps;
      ps.reserve(members.size());
      for (const auto& [i, upper] : members)
        ps.push_back(upper ? rep.outcomes[i].p_up : rep.outcomes[i].p_lo);
      const auto holm = holm_bonferroni(ps, cfg.fwer);
      for (std::size_t k = 0; k < members.size(); ++k) {
        if (!holm.rejected[k]) continue;
        if (members[k].second) rep.rejected_up[members[k].first] = true;
        else rep.rejected_lo[members[k].first] = true;
      }
    }
    return 0;
  });

  std::map<std::string, QuantityRow> rows;
  for (std::size_t i = 0; i < rep.outcomes.size(); ++i) {
    auto& row = rows[rep.outcomes[i].label];
    row.quantity = rep.outcomes[i].label;
    ++row.hypotheses;
    if (rep.outcomes[i].status == TestStatus::Tested) ++row.tested;
    if (rep.rejected_lo[i]) ++row.rejected_lo;
    if (rep.rejected_up[i]) ++row.rejected_up;
  }
  for (auto& [_, row] : rows) rep.table.push_back(row);

  run_stage("plot-data", [&] {
    nlohmann::json plots;
    for (const auto& [quantity, _] : rows) {
      nlohmann::json block;
      std::vector<double> p_lo, p_up, obs_raw, twin_raw;
      for (std::size_t i = 0; i < rep.outcomes.size(); ++i) {
        if (rep.outcomes[i].label != quantity || rep.outcomes[i].status != TestStatus::Tested)
          continue;
        p_lo.push_back(rep.outcomes[i].p_lo);
        p_up.push_back(rep.outcomes[i].p_up);
        collect_obs_raw(d1, specs[i], obs_raw);
        collect_twin_raw(twins.at(specs[i].actions), specs[i], twin_raw);
      }
      block["p_lo"] = p_lo;
      block["p_up"] = p_up;
      block["obs_histogram"] = histogram_json(std::move(obs_raw), cfg.truncate_histograms);
      block["twin_histogram"] = histogram_json(std::move(twin_raw), cfg.truncate_histograms);
      plots[quantity] = std::move(block);
    }
    rep.plot_data = std::move(plots);
    return 0;
  });

  rep.metadata = {{"config", assessment_config_to_json(cfg)},
                  {"dataset_digest", dataset_digest(data)},
                  {"held_out_digest", dataset_digest(d0)},
                  {"main_digest", dataset_digest(d1)},
                  {"num_hypotheses", specs.size()},
                  {"num_action_sequences", twins.size()}};
  return rep;
}

nlohmann::json report_to_json(const AssessmentReport& r) {
  nlohmann::json j;
  j["metadata"] = r.metadata;
  nlohmann::json outs = nlohmann::json::array();
  for (std::size_t i = 0; i < r.outcomes.size(); ++i)
    outs.push_back(outcome_to_json(r.outcomes[i], r.rejected_lo[i], r.rejected_up[i]));
  j["outcomes"] = std::move(outs);
  nlohmann::json table = nlohmann::json::array();
  for (const auto& row : r.table)
    table.push_back({{"quantity", row.quantity},
                     {"hypotheses", row.hypotheses},
                     {"tested", row.tested},
                     {"rejected_lo", row.rejected_lo},
                     {"rejected_up", row.rejected_up}});
  j["table"] = std::move(table);
  j["plot_data"] = r.plot_data;
  return j;
}

std::string report_to_csv(const AssessmentReport& r) {
  std::ostringstream os;
  os << "quantity,hypotheses,tested,rejected_lo,rejected_up\n";
  for (const auto& row : r.table)
    os << row.quantity << "," << row.hypotheses << "," << row.tested << "," << row.rejected_lo
       << "," << row.rejected_up << "\n";
  return os.str();
}

std::vector<LongitudinalPoint> longitudinal_comparison(const TrajectoryDataset& obs,
                                                       const TwinDataset& twin,
                                                       const std::vector<HypothesisSpec>& family,
                                                       double alpha) {
  std::vector<LongitudinalPoint> series;
  for (const auto& spec : family) {
    if (static_cast<int>(twin.actions.size()) < spec.t)
      throw ValidationError("twin dataset shorter than the spec family");
    for (int s = 0; s < spec.t; ++s)
      if (twin.actions[static_cast<std::size_t>(s)] != spec.actions[static_cast<std::size_t>(s)])
        throw ValidationError("spec family actions are not a prefix of the twin's action tag");

    LongitudinalPoint pt;
    pt.t = spec.t;
    const auto qs = qualifying_samples(obs, spec);
    pt.n = static_cast<long>(qs.y_lo.size());

    // Naive estimate: mean over action-agreeing in-region trajectories only.
    std::vector<double> agree_vals;
    collect_obs_raw(obs, spec, agree_vals);
    for (double& v : agree_vals) v = clip(v, spec.outcome.y_lo, spec.outcome.y_up);

    TwinDataset prefix;
    prefix.schema = twin.schema;
    prefix.actions.assign(twin.actions.begin(), twin.actions.begin() + spec.t);
    for (const auto& rec : twin.records) {
      TwinRecord cut;
      cut.x0 = rec.x0;
      cut.steps.assign(rec.steps.begin(), rec.steps.begin() + spec.t);
      prefix.records.push_back(std::move(cut));
    }
    const auto twin_ys = twin_samples(prefix, spec);
    pt.n_hat = static_cast<long>(twin_ys.size());

    pt.present = !agree_vals.empty() && pt.n_hat > 0;
    if (pt.present) {
      pt.naive = mean(agree_vals);
      pt.q_hat = mean(twin_ys);
      const auto b = summary_from_samples(qs, spec.outcome.range());
      const double d_obs = hoeffding_margin(pt.n, spec.outcome.range(), alpha);
      const double d_twin = hoeffding_margin(pt.n_hat, spec.outcome.range(), alpha);
      pt.q_lo_alpha = b.mu_lo - d_obs;
      pt.q_up_alpha = b.mu_up + d_obs;
      pt.qhat_lo_alpha = pt.q_hat - d_twin;
      pt.qhat_up_alpha = pt.q_hat + d_twin;
    }
    series.push_back(pt);
  }
  return series;
}

std::vector<SweepRow> sensitivity_sweep(const TrajectoryDataset& obs,
                                        const std::map<std::vector<int>, TwinDataset>& twins,
                                        const std::vector<HypothesisSpec>& specs,
                                        const TestConfig& test_cfg, double fwer,
                                        const std::vector<double>& deltas) {
  std::vector<SweepRow> rows;
  for (double delta : deltas) {
    SweepRow row;
    row.delta = delta;
    std::vector<TestOutcome> outs;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      HypothesisSpec spec = specs[i];
      spec.outcome.y_lo = specs[i].outcome.y_lo * (1.0 - delta / 2.0);
      spec.outcome.y_up = specs[i].outcome.y_up * (1.0 + delta / 2.0);
      if (spec.outcome.y_lo >= spec.outcome.y_up) {
        ++row.specs_dropped;
        continue;
      }
      TestConfig tc = test_cfg;
      tc.seed = mix_seed(test_cfg.seed, 1000 + i);
      outs.push_back(test_hypothesis(obs, twins.at(spec.actions), spec, tc));
    }
    row.skipped = outs.empty() && row.specs_dropped > 0;
    std::vector<double> ps;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      if (outs[i].status != TestStatus::Tested) continue;
      ++row.tested;
      ps.push_back(outs[i].p_lo);
      ps.push_back(outs[i].p_up);
    }
    if (!ps.empty()) {
      const auto holm = holm_bonferroni(ps, fwer);
      row.rejections = static_cast<long>(holm.num_rejected());
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace twincheck
