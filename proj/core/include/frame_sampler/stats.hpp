#pragma once

#include <span>
#include <vector>

namespace frame_sampler::stats {

double mean(std::span<const double> x);

/// Sample variance with the n - 1 divisor. Zero for fewer than two values.
double variance(std::span<const double> x);

/// Quantile by linear interpolation between order statistics (R type 7).
double quantile(std::span<const double> x, double p);

double median(std::span<const double> x);

/// Several quantiles in one sort.
std::vector<double> quantiles(std::span<const double> x, std::span<const double> probs);

} // namespace frame_sampler::stats
