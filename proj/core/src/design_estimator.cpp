#include "frame_sampler/design_estimator.hpp"

#include "frame_sampler/errors.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace frame_sampler {

std::string_view to_string(Inference inference) noexcept {
    return inference == Inference::design ? "design" : "model";
}

Inference parse_inference(std::string_view name) {
    if (name == "design") {
        return Inference::design;
    }
    if (name == "model") {
        return Inference::model;
    }
    throw InputError("unknown inference paradigm: " + std::string{name});
}

double hajek_mean(const WeightedSample &sample) {
    if (sample.rows.empty()) {
        throw InputError("hajek_mean: empty sample");
    }
    double sw = 0.0;
    double swy = 0.0;
    for (const auto &row : sample.rows) {
        if (!(row.w > 0.0) || !std::isfinite(row.w)) {
            throw InputError("hajek_mean: weights must be positive and finite");
        }
        sw += row.w;
        swy += row.w * row.y;
    }
    return swy / sw;
}

double wr_linearized_variance(const WeightedSample &sample) {
    const double mean = hajek_mean(sample);
    std::map<std::int64_t, double> totals;
    double sw = 0.0;
    for (const auto &row : sample.rows) {
        totals[row.psu_id] += row.w * (row.y - mean);
        sw += row.w;
    }
    const auto m = totals.size();
    if (m < 2) {
        throw EstimationError("wr_linearized_variance: need at least two PSUs");
    }
    double ubar = 0.0;
    for (const auto &[psu, u] : totals) {
        ubar += u;
    }
    ubar /= static_cast<double>(m);
    double ss = 0.0;
    for (const auto &[psu, u] : totals) {
        ss += (u - ubar) * (u - ubar);
    }
    const double md = static_cast<double>(m);
    return md / (md - 1.0) * ss / (sw * sw);
}

double srs_wr_reference_variance(const WeightedSample &sample) {
    const auto n = sample.rows.size();
    if (n < 2) {
        throw EstimationError("srs_wr_reference_variance: need at least two observations");
    }
    const double mean = hajek_mean(sample);
    double sw = 0.0;
    double ss = 0.0;
    for (const auto &row : sample.rows) {
        sw += row.w;
        ss += row.w * (row.y - mean) * (row.y - mean);
    }
    const double nd = static_cast<double>(n);
    const double s2 = nd / (nd - 1.0) * ss / sw;
    return s2 / nd;
}

DesignEffect design_effect(double v_design, double v_srs, std::size_t n) {
    if (!(v_srs > 0.0)) {
        throw EstimationError("design_effect: reference variance is zero");
    }
    const double deff = v_design / v_srs;
    const double n_eff = deff > 0.0 ? static_cast<double>(n) / deff : std::numeric_limits<double>::infinity();
    return {deff, n_eff};
}

EstimateRecord design_estimate(const WeightedSample &sample, OutcomeLevel level) {
    EstimateRecord record;
    record.inference = Inference::design;
    record.n = sample.rows.size();
    record.estimate = hajek_mean(sample);
    record.variance = wr_linearized_variance(sample);
    if (level == OutcomeLevel::household) {
        return record;
    }
    const double v_srs = srs_wr_reference_variance(sample);
    if (v_srs > 0.0) {
        const auto d = design_effect(record.variance, v_srs, record.n);
        record.deff = d.deff;
        if (std::isfinite(d.n_eff)) {
            record.n_eff = d.n_eff;
        } else {
            record.flags = "deff_zero";
        }
    } else {
        record.flags = "deff_undefined";
    }
    return record;
}

} // namespace frame_sampler
