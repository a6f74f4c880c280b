#pragma once

#include <span>
#include <vector>

namespace frame_sampler {

/// Rank-normalized split-R-hat over equal-length chains.
/// Returns 1 for a parameter that never moves.
double split_rhat(std::span<const std::vector<double>> chains);

/// Bulk effective sample size: Geyer's initial monotone sequence estimator
/// on rank-normalized split chains. Returns the total draw count for a
/// parameter that never moves.
double bulk_ess(std::span<const std::vector<double>> chains);

/// Normal scores (r - 3/8) / (S + 1/4) of the pooled draws, average ranks on ties,
/// returned chain by chain.
std::vector<std::vector<double>> rank_normalize(std::span<const std::vector<double>> chains);

} // namespace frame_sampler
