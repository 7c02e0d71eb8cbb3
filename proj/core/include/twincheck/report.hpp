#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "twincheck/hypothesis_gen.hpp"
#include "twincheck/testing.hpp"
#include "twincheck/twin.hpp"
#include "twincheck/world.hpp"

namespace twincheck {

/// Full pipeline configuration; one JSON file, every field overridable from
/// the command line.
struct AssessmentConfig {
  // Data source: a dataset file plus schema, or a world sampled at run time.
  std::string dataset_path;
  std::string schema_path;
  std::string world;  // built-in world name or world JSON path
  long world_samples = 5000;

  // Twin source: a subprocess command wins over the built-in world twin.
  std::string twin_world;             // empty = same world as the data source
  std::string twin_mode = "correct";  // correct | shifted | blind
  double twin_delta = 0.0;
  std::vector<std::string> twin_command;
  double twin_timeout_seconds = 30.0;
  int twin_parallelism = 1;
  long twin_samples = 0;  // per action sequence; 0 = as many as the main split allows

  // Hypotheses: an explicit file wins over generation from the held-out split.
  std::string hypotheses_path;
  GenerationConfig generation;
  double held_out_fraction = 0.5;
  std::vector<std::string> raw_dose_columns;  // empty = actions are already indices

  TestConfig test;
  double fwer = 0.05;
  bool per_quantity_families = false;  // Holm within each quantity instead of jointly
  bool truncate_histograms = true;     // clip plot data at the .025/.975 quantiles
  std::uint64_t seed = 0;
};

AssessmentConfig assessment_config_from_json(const nlohmann::json& j);
nlohmann::json assessment_config_to_json(const AssessmentConfig& cfg);

/// Built-in world name ("brake-pad", "brake-pad-high-propensity",
/// "confounded-chain", "deterministic-chain", "random:<seed>") or a world
/// JSON path.
DiscreteWorld resolve_world(const std::string& name);

/// Twin source from the config: subprocess command when given, otherwise a
/// world twin in the configured mode.
std::unique_ptr<TwinFactory> make_twin_factory(const AssessmentConfig& cfg);

struct QuantityRow {
  std::string quantity;
  long hypotheses = 0;
  long tested = 0;
  long rejected_lo = 0;
  long rejected_up = 0;
};

struct AssessmentReport {
  nlohmann::json metadata;
  std::vector<TestOutcome> outcomes;  // ordered by spec id
  std::vector<bool> rejected_lo;      // Holm decisions, aligned with outcomes
  std::vector<bool> rejected_up;
  std::vector<QuantityRow> table;
  nlohmann::json plot_data;

  long total_rejections() const;
};

nlohmann::json report_to_json(const AssessmentReport& r);
std::string report_to_csv(const AssessmentReport& r);

/// Runs ingest, split, binning, hypothesis generation, twin generation,
/// testing, and multiplicity control. Deterministic given the config;
/// StageErrors are annotated with the failing stage.
AssessmentReport run_assessment(const AssessmentConfig& cfg);

struct LongitudinalPoint {
  int t = 0;
  bool present = false;  // false when either side has no support at t
  long n = 0;
  long n_hat = 0;
  double naive = 0.0;  // mean over action-agreeing in-region trajectories
  double q_hat = 0.0;
  double q_lo_alpha = 0.0;  // one-sided Hoeffding bounds at alpha
  double q_up_alpha = 0.0;
  double qhat_lo_alpha = 0.0;
  double qhat_up_alpha = 0.0;
};

/// family holds one spec per t (shared action and region prefixes); the twin
/// dataset must be tagged with the longest spec's actions.
std::vector<LongitudinalPoint> longitudinal_comparison(const TrajectoryDataset& obs,
                                                       const TwinDataset& twin,
                                                       const std::vector<HypothesisSpec>& family,
                                                       double alpha);

struct SweepRow {
  double delta = 0.0;
  bool skipped = false;  // every spec's interval inverted
  long specs_dropped = 0;
  long tested = 0;
  long rejections = 0;
};

/// Reruns testing with outcome intervals [y_lo(1 - d/2), y_up(1 + d/2)],
/// reusing the twin datasets (keyed by action sequence).
std::vector<SweepRow> sensitivity_sweep(const TrajectoryDataset& obs,
                                        const std::map<std::vector<int>, TwinDataset>& twins,
                                        const std::vector<HypothesisSpec>& specs,
                                        const TestConfig& test_cfg, double fwer,
                                        const std::vector<double>& deltas);

}  // namespace twincheck
