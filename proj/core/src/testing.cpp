#include "twincheck/testing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "twincheck/errors.hpp"
#include "twincheck/stats.hpp"

namespace twincheck {

namespace {
constexpr double kAlphaGridFloor = 1e-6;
constexpr int kAlphaGridPoints = 120;
constexpr double kMinP = 1e-300;  // p-values live in (0, 1]
}  // namespace

std::string to_string(TestStatus s) {
  switch (s) {
    case TestStatus::Tested: return "tested";
    case TestStatus::SkippedAntecedent: return "skipped(antecedent)";
    case TestStatus::SkippedDegenerate: return "skipped(uninformative)";
    case TestStatus::SkippedSmallSample: return "skipped(small-sample)";
  }
  return "tested";
}

std::string to_string(TestMethod m) {
  return m == TestMethod::Hoeffding ? "hoeffding" : "bootstrap";
}

double hoeffding_margin(long n, double y_range, double alpha) {
  if (n < 1) throw ValidationError("hoeffding_margin needs n >= 1");
  if (alpha <= 0.0 || alpha >= 1.0) throw ValidationError("alpha must lie in (0,1)");
  if (y_range < 0.0) throw ValidationError("y_range must be nonnegative");
  return y_range * std::sqrt(std::log(2.0 / alpha) / (2.0 * static_cast<double>(n)));
}

namespace {

// Inverts the rejection condition mu_hat + Delta_hat < mu_lo - Delta (H_lo) or
// mu_hat - Delta_hat > mu_up + Delta (H_up). Both margins share the factor
// range * sqrt(log(2/alpha)/2), so the test rejects at alpha iff
// sqrt(log(2/alpha)/2) < c with c as below; the infimum level is 2 exp(-2 c^2).
double hoeffding_p_from_gap(double gap, double range, long n, long n_hat) {
  if (range <= 0.0) return 1.0;
  const double denom = range * (1.0 / std::sqrt(static_cast<double>(n)) +
                                1.0 / std::sqrt(static_cast<double>(n_hat)));
  const double c = gap / denom;
  if (c <= 0.0) return 1.0;
  const double p = 2.0 * std::exp(-2.0 * c * c);
  return std::min(1.0, std::max(p, kMinP));
}

}  // namespace

double p_value_hoeffding_lo(const BoundSummary& obs, const TwinSummary& twin,
                            const HypothesisSpec& spec) {
  if (obs.empty() || twin.empty()) return 1.0;
  return hoeffding_p_from_gap(obs.mu_lo - twin.mu_hat, spec.outcome.range(), obs.n, twin.n_hat);
}

double p_value_hoeffding_up(const BoundSummary& obs, const TwinSummary& twin,
                            const HypothesisSpec& spec) {
  if (obs.empty() || twin.empty()) return 1.0;
  return hoeffding_p_from_gap(twin.mu_hat - obs.mu_up, spec.outcome.range(), obs.n, twin.n_hat);
}

std::vector<double> bootstrap_resampled_means(std::span<const double> samples, long num_resamples,
                                              std::uint64_t seed) {
  if (samples.empty()) throw ValidationError("bootstrap on empty sample set");
  if (num_resamples < 1) throw ValidationError("need at least one bootstrap resample");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(num_resamples));
  for (long b = 0; b < num_resamples; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) s += samples[pick(rng)];
    means.push_back(s / static_cast<double>(samples.size()));
  }
  std::sort(means.begin(), means.end());
  return means;
}

double bootstrap_bound_from_means(double sample_mean, std::span<const double> sorted_means,
                                  double alpha, BoundSide side, BootstrapVariant variant) {
  const double q_level = side == BoundSide::Lower ? 1.0 - alpha / 2.0 : alpha / 2.0;
  const double q = quantile_sorted(sorted_means, q_level);
  if (variant == BootstrapVariant::ReversePercentile) return 2.0 * sample_mean - q;
  // Percentile variant reads the opposite tail directly.
  return quantile_sorted(sorted_means, side == BoundSide::Lower ? alpha / 2.0 : 1.0 - alpha / 2.0);
}

double bootstrap_bound(std::span<const double> samples, double alpha, BoundSide side,
                       long num_resamples, std::uint64_t seed, BootstrapVariant variant) {
  if (alpha <= 0.0 || alpha >= 1.0) throw ValidationError("alpha must lie in (0,1)");
  const auto means = bootstrap_resampled_means(samples, num_resamples, seed);
  return bootstrap_bound_from_means(mean(samples), means, alpha, side, variant);
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  grid.reserve(kAlphaGridPoints);
  const double lo = std::log(kAlphaGridFloor);
  for (int i = 0; i < kAlphaGridPoints; ++i) {
    const double f = static_cast<double>(i) / (kAlphaGridPoints - 1);
    grid.push_back(std::exp(lo * (1.0 - f)));
  }
  grid.back() = 1.0;
  return grid;
}

TestOutcome test_hypothesis(const TrajectoryDataset& obs_data, const TwinDataset& twin_data,
                            const HypothesisSpec& spec, const TestConfig& cfg,
                            std::span<const double> alpha_grid) {
  TestOutcome out;
  out.spec_id = spec.id;
  out.label = spec.label;
  out.method = cfg.method;
  out.alpha = cfg.alpha;

  const auto qs = qualifying_samples(obs_data, spec);
  out.obs = summary_from_samples(qs, spec.outcome.range());
  const auto twin_ys = twin_samples(twin_data, spec);
  out.twin.n_hat = static_cast<long>(twin_ys.size());
  if (out.twin.n_hat > 0) out.twin.mu_hat = mean(twin_ys);
  out.n = out.obs.n;
  out.n_hat = out.twin.n_hat;

  // Positivity antecedents: a trajectory with A_{1:t} = a_{1:t} and full region
  // membership on the observational side, and an in-region twin trajectory.
  out.antecedent_ok = qs.agree_count > 0 && out.twin.n_hat > 0;
  if (!out.antecedent_ok) {
    out.status = TestStatus::SkippedAntecedent;
    return out;
  }
  if (spec.outcome.degenerate()) {
    out.status = TestStatus::SkippedDegenerate;
    return out;
  }

  if (cfg.method == TestMethod::Hoeffding) {
    out.status = TestStatus::Tested;
    out.p_lo = p_value_hoeffding_lo(out.obs, out.twin, spec);
    out.p_up = p_value_hoeffding_up(out.obs, out.twin, spec);
    const double range = spec.outcome.range();
    const double d_obs = hoeffding_margin(out.n, range, cfg.alpha);
    const double d_twin = hoeffding_margin(out.n_hat, range, cfg.alpha);
    out.q_lo_alpha = out.obs.mu_lo - d_obs;
    out.q_up_alpha = out.obs.mu_up + d_obs;
    out.qhat_up_alpha = out.twin.mu_hat + d_twin;
    out.qhat_lo_alpha = out.twin.mu_hat - d_twin;
    return out;
  }

  if (out.n < cfg.min_bootstrap_n || out.n_hat < cfg.min_bootstrap_n) {
    out.status = TestStatus::SkippedSmallSample;
    return out;
  }
  out.status = TestStatus::Tested;

  const auto grid = alpha_grid.empty()
                        ? default_alpha_grid()
                        : std::vector<double>(alpha_grid.begin(), alpha_grid.end());
  // One resample set per sample vector, reused across the grid, keeps the
  // bounds nested in alpha.
  const auto means_lo = bootstrap_resampled_means(qs.y_lo, cfg.bootstrap_samples,
                                                  mix_seed(cfg.seed, 1));
  const auto means_up = bootstrap_resampled_means(qs.y_up, cfg.bootstrap_samples,
                                                  mix_seed(cfg.seed, 2));
  const auto means_twin = bootstrap_resampled_means(twin_ys, cfg.bootstrap_samples,
                                                    mix_seed(cfg.seed, 3));
  const auto v = cfg.bootstrap_variant;

  double p_lo = 1.0, p_up = 1.0;
  for (double a : grid) {
    const double q_lo = bootstrap_bound_from_means(out.obs.mu_lo, means_lo, a, BoundSide::Lower, v);
    const double qhat_up =
        bootstrap_bound_from_means(out.twin.mu_hat, means_twin, a, BoundSide::Upper, v);
    if (qhat_up < q_lo) {
      p_lo = std::min(p_lo, a);
    }
    const double q_up = bootstrap_bound_from_means(out.obs.mu_up, means_up, a, BoundSide::Upper, v);
    const double qhat_lo =
        bootstrap_bound_from_means(out.twin.mu_hat, means_twin, a, BoundSide::Lower, v);
    if (qhat_lo > q_up) {
      p_up = std::min(p_up, a);
    }
  }
  out.p_lo = p_lo;
  out.p_up = p_up;
  out.q_lo_alpha =
      bootstrap_bound_from_means(out.obs.mu_lo, means_lo, cfg.alpha, BoundSide::Lower, v);
  out.q_up_alpha =
      bootstrap_bound_from_means(out.obs.mu_up, means_up, cfg.alpha, BoundSide::Upper, v);
  out.qhat_up_alpha =
      bootstrap_bound_from_means(out.twin.mu_hat, means_twin, cfg.alpha, BoundSide::Upper, v);
  out.qhat_lo_alpha =
      bootstrap_bound_from_means(out.twin.mu_hat, means_twin, cfg.alpha, BoundSide::Lower, v);
  return out;
}

std::size_t MultiplicityResult::num_rejected() const {
  return static_cast<std::size_t>(std::count(rejected.begin(), rejected.end(), true));
}

MultiplicityResult holm_bonferroni(std::span<const double> p_values, double fwer) {
  for (double p : p_values)
    if (!(p > 0.0 && p <= 1.0)) throw ValidationError("p-values must lie in (0,1]");
  MultiplicityResult r;
  r.fwer = fwer;
  const std::size_t m = p_values.size();
  r.order.resize(m);
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  r.rejected.assign(m, false);
  r.sorted_p.reserve(m);
  bool stopped = false;
  for (std::size_t k = 0; k < m; ++k) {
    const double p = p_values[r.order[k]];
    r.sorted_p.push_back(p);
    if (!stopped && p <= fwer / static_cast<double>(m - k)) {
      r.rejected[r.order[k]] = true;
    } else {
      stopped = true;
    }
  }
  return r;
}

}  // namespace twincheck
