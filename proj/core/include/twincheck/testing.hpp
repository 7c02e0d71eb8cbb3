#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twincheck/bounds.hpp"
#include "twincheck/hypothesis.hpp"

namespace twincheck {

enum class TestMethod { Hoeffding, Bootstrap };
enum class BootstrapVariant { ReversePercentile, Percentile };

enum class TestStatus {
  Tested,
  SkippedAntecedent,     // no observational or twin support for the conditioning event
  SkippedDegenerate,     // y_lo == y_up, bounds collapse
  SkippedSmallSample,    // bootstrap guard: n or n_hat below the floor
};

std::string to_string(TestStatus s);
std::string to_string(TestMethod m);

struct TestOutcome {
  std::string spec_id;
  std::string label;
  bool antecedent_ok = false;
  long n = 0;
  long n_hat = 0;
  double p_lo = 1.0;
  double p_up = 1.0;
  TestMethod method = TestMethod::Hoeffding;
  TestStatus status = TestStatus::SkippedAntecedent;
  // Confidence bounds at the decision level alpha, when tested.
  double alpha = 0.05;
  double q_lo_alpha = 0.0;   // lower confidence bound on Q_lo
  double q_up_alpha = 0.0;   // upper confidence bound on Q_up
  double qhat_up_alpha = 0.0;  // upper confidence bound on Q_hat (H_lo side)
  double qhat_lo_alpha = 0.0;  // lower confidence bound on Q_hat (H_up side)
  BoundSummary obs;
  TwinSummary twin;
};

struct TestConfig {
  TestMethod method = TestMethod::Hoeffding;
  double alpha = 0.05;
  long bootstrap_samples = 100;
  long min_bootstrap_n = 100;
  std::uint64_t seed = 0;
  BootstrapVariant bootstrap_variant = BootstrapVariant::ReversePercentile;
};

/// Delta = y_range * sqrt(log(2/alpha) / (2n)).
double hoeffding_margin(long n, double y_range, double alpha);

/// Closed-form p for H_lo: min(1, 2 exp(-2 c^2)) with
/// c = (mu_lo - mu_hat) / ((y_up - y_lo)(1/sqrt(n) + 1/sqrt(n_hat))), 1 if c <= 0.
double p_value_hoeffding_lo(const BoundSummary& obs, const TwinSummary& twin,
                            const HypothesisSpec& spec);
double p_value_hoeffding_up(const BoundSummary& obs, const TwinSummary& twin,
                            const HypothesisSpec& spec);

enum class BoundSide { Lower, Upper };

/// Reverse-percentile one-sided bound at level 1 - alpha/2:
/// lower side 2*mean - quantile_{1-alpha/2}(resampled means),
/// upper side 2*mean - quantile_{alpha/2}(resampled means).
double bootstrap_bound(std::span<const double> samples, double alpha, BoundSide side,
                       long num_resamples, std::uint64_t seed,
                       BootstrapVariant variant = BootstrapVariant::ReversePercentile);

/// Resampled means, sorted ascending; one set is reused across the alpha grid
/// so the resulting bounds are nested.
std::vector<double> bootstrap_resampled_means(std::span<const double> samples, long num_resamples,
                                              std::uint64_t seed);
double bootstrap_bound_from_means(double sample_mean, std::span<const double> sorted_means,
                                  double alpha, BoundSide side, BootstrapVariant variant);

/// Log-spaced significance grid on [1e-6, 1]; 120 points.
std::vector<double> default_alpha_grid();

TestOutcome test_hypothesis(const TrajectoryDataset& obs_data, const TwinDataset& twin_data,
                            const HypothesisSpec& spec, const TestConfig& cfg,
                            std::span<const double> alpha_grid = {});

struct MultiplicityResult {
  std::vector<double> sorted_p;        // ascending
  std::vector<std::size_t> order;      // original index of each sorted entry
  std::vector<bool> rejected;          // by original index
  double fwer = 0.05;

  std::size_t num_rejected() const;
};

/// Holm step-down; ties broken by original index (stable sort).
MultiplicityResult holm_bonferroni(std::span<const double> p_values, double fwer);

}  // namespace twincheck
