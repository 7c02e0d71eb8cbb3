#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace twincheck {

/// Quantile with linear interpolation between order statistics.
/// values need not be sorted; q in [0, 1].
double quantile(std::vector<double> values, double q);

/// Same, for an already ascending-sorted range.
double quantile_sorted(std::span<const double> sorted, double q);

double mean(std::span<const double> xs);

/// Unbiased sample variance; 0 for fewer than two points.
double sample_variance(std::span<const double> xs);

double clip(double z, double lo, double hi);

/// Decorrelates a base seed and a stream index (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace twincheck
