#pragma once

#include "frame_sampler/weights.hpp"

#include <string>

namespace frame_sampler {

enum class Inference { design, model };

std::string_view to_string(Inference inference) noexcept;
Inference parse_inference(std::string_view name);

/// One row of the results table.
struct EstimateRecord {
    SchemeId scheme = SchemeId::srs_systematic;
    std::string module_name;
    Inference inference = Inference::design;
    std::size_t n = 0;
    double estimate = 0.0;
    double variance = 0.0;
    /// Unset for household-level modules (raw variances are compared) and for
    /// rows whose reference variance is zero.
    std::optional<double> deff;
    std::optional<double> n_eff;
    std::size_t replication_id = 0;
    std::string flags;
};

/// Hajek ratio mean: sum w y / sum w.
double hajek_mean(const WeightedSample &sample);

/// With-replacement linearized variance of the Hajek mean.
///
/// With e_i = y_i - yhat and PSU totals u_h = sum_{i in h} w_i e_i over m PSUs:
///   V = m / (m - 1) * sum_h (u_h - ubar)^2 / (sum_i w_i)^2.
/// Throws EstimationError with fewer than two PSUs.
double wr_linearized_variance(const WeightedSample &sample);

/// SRS-with-replacement reference variance s^2 / n with
/// s^2 = n / (n - 1) * sum w (y - yhat)^2 / sum w. Throws EstimationError for n < 2.
double srs_wr_reference_variance(const WeightedSample &sample);

struct DesignEffect {
    double deff = 0.0;
    double n_eff = 0.0;
};

/// deff = v_design / v_srs, n_eff = n / deff (infinite when deff is 0).
/// Throws EstimationError when v_srs is not positive.
DesignEffect design_effect(double v_design, double v_srs, std::size_t n);

/// Hajek mean, its variance and (for person-level modules) the design effect.
/// `n` is the number of sampled persons (rows).
EstimateRecord design_estimate(const WeightedSample &sample, OutcomeLevel level);

} // namespace frame_sampler
