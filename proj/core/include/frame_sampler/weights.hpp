#pragma once

#include "frame_sampler/frame.hpp"
#include "frame_sampler/random.hpp"
#include "frame_sampler/sampler.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace frame_sampler {

enum class InclusionMethod { closed_form_exact, closed_form_approx, monte_carlo, enumeration };

std::string_view to_string(InclusionMethod method) noexcept;

/// Inclusion probability shared by the eligible members of one household.
struct InclusionResult {
    double pi = 0.0;
    InclusionMethod method = InclusionMethod::closed_form_exact;
    std::size_t mc_replicates = 0;
    double mc_standard_error = 0.0;
};

struct PpsInclusion {
    /// 1 - (1 - p_h n_h / N_h)^m
    double exact = 0.0;
    /// m p_h n_h / N_h
    double approx = 0.0;
};

/// Person inclusion probability under m with-replacement PPS draws with n_h
/// of N_h members subsampled per draw. N_h = 0 gives 0 for both forms.
PpsInclusion pps_inclusion(double p_h, int n_h, int N_h, std::size_t m);

enum class WithinScheme { systematic, stratified };

/// Stage-II selection probability (*) given the household's N_h and the stage-I total N_{s_I}.
double within_selection_probability(WithinScheme scheme, int N_h, long long stage_total, int n_target);

/// SRS-scheme inclusion probability of the members of household `h`:
/// (n_I / N_I) times the mean of (*) over uniform random stage-I samples containing h.
/// Always Monte Carlo with `replicates` draws.
InclusionResult srs_scheme_inclusion_mc(const GroupIndex &index, std::size_t h, std::size_t n_I, int n_target,
                                        WithinScheme scheme, std::size_t replicates, Rng &rng);

/// Same quantity by exhaustive enumeration over all C(N_I - 1, n_I - 1) sets containing h.
InclusionResult srs_scheme_inclusion_exhaustive(const GroupIndex &index, std::size_t h, std::size_t n_I,
                                                int n_target, WithinScheme scheme);

/// C(N_I - 1, n_I - 1) up to which the exhaustive route is used automatically.
inline constexpr double enumeration_limit = 1e5;

/// C(n, k) as a double, saturating at +inf.
double binomial_coefficient(std::size_t n, std::size_t k);

/// Inclusion probabilities for every household of the frame (indexed by
/// household). Enumerates when C(N_I - 1, n_I - 1) <= enumeration_limit;
/// otherwise shares `replicates` random permutations across households.
std::vector<InclusionResult> srs_scheme_inclusion_all(const GroupIndex &index, std::size_t n_I, int n_target,
                                                      WithinScheme scheme, std::size_t replicates, Rng &rng);

struct WeightedRow {
    PersonId person_id{};
    HouseholdId household_id{};
    /// First-stage unit: the (unique) household, or the person under SRS of persons.
    std::int64_t psu_id = 0;
    double y = 0.0;
    double w = 1.0;
};

struct WeightedSample {
    std::vector<WeightedRow> rows;

    std::size_t psu_count() const;
};

/// Everything design_weights needs besides the stage-II sample.
struct DesignContext {
    const PopulationFrame *frame = nullptr;
    const GroupIndex *index = nullptr;
    const SurveyModuleSpec *module = nullptr;
    SchemeId scheme = SchemeId::srs_systematic;
    /// Null for srs_persons.
    const StageISample *stage_i = nullptr;
    /// PPS size measure x_h, indexed by household.
    std::span<const double> size_measure;
    /// SRS household-scheme inclusion probabilities, indexed by household.
    std::span<const InclusionResult> household_inclusion;
};

/// Design weights for every selected person.
///
/// PPS persons get (sum x / (m x_h)) (N_h / n_h) with n_h = 1 per draw and m the
/// retained draw count; SRS household schemes get 1 / pi from
/// household_inclusion; srs_persons gets N / n. Household-level modules weight
/// heads by 1 / pi_h with pi_h = n_I / N_I (SRS), 1 - (1 - p_h)^m_I (PPS) or n / N
/// (srs_persons, a simple random sample of heads).
/// Throws ConsistencyError for a selected person with zero probability or a
/// missing outcome.
WeightedSample design_weights(const DesignContext &context, const StageIISample &sample);

/// Largest |approx - exact| / exact over the PPS households in `sample`.
double pps_approximation_gap(const DesignContext &context, const StageIISample &sample);

/// Rows `scheme,module,psu_id,household_id,person_id,y,w`.
void write_weighted_header(std::ostream &out);
void write_weighted_rows(std::ostream &out, std::string_view scheme, std::string_view module,
                         const WeightedSample &sample);

} // namespace frame_sampler
