#pragma once

#include "frame_sampler/frame.hpp"
#include "frame_sampler/random.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace frame_sampler {

enum class StageIScheme { srs_wor, pps_wr };

/// First-stage household sample.
///
/// `households` holds unique household indices in ascending order and
/// `draw_counts` the matching k_h (all 1 for SRS). `draws` is n_I for SRS
/// (the requested size) or m_I for PPS.
struct StageISample {
    StageIScheme scheme = StageIScheme::srs_wor;
    std::vector<std::size_t> households;
    std::vector<int> draw_counts;
    std::size_t draws = 0;
    bool whole_frame = false;
    std::string size_measure_name;

    std::size_t unique_count() const noexcept { return households.size(); }
};

enum class SchemeId {
    srs_stratified,
    srs_systematic,
    pps_one_per_draw,
    /// Simple random sample of eligible persons, ignoring households.
    srs_persons,
};

std::string_view to_string(SchemeId scheme) noexcept;
SchemeId parse_scheme(std::string_view name);

/// The stage-I design a scheme runs on; srs_persons has none.
std::optional<StageIScheme> stage_i_scheme_of(SchemeId scheme) noexcept;

struct HouseholdAllocation {
    std::size_t household = 0;
    /// Distinct persons selected in the household.
    int n_h = 0;
    /// Retained PPS draw instances of the household; 0 for SRS designs.
    int k_h = 0;
};

/// Parameters of one systematic draw.
struct SystematicDraw {
    double interval = 0.0;
    double offset = 0.0;
    std::uint64_t ordering_seed = 0;
};

/// Second-stage person sample.
struct StageIISample {
    /// Selected person indices, ascending and unique.
    std::vector<std::size_t> persons;
    /// One entry per household contributing to the design, ascending by household.
    std::vector<HouseholdAllocation> allocation;
    bool census = false;
    /// PPS only: draw instances kept after thinning r_I.
    std::size_t retained_draws = 0;
    std::optional<SystematicDraw> systematic;
    std::vector<std::string> warnings;
};

/// A scheme applied to one survey module.
struct SamplingPlan {
    SchemeId scheme = SchemeId::srs_systematic;
    SurveyModuleSpec module;
    std::optional<StageIScheme> stage_i;
    /// n_I or m_I.
    std::size_t stage_i_draws = 300;
    std::uint64_t seed = 0;
};

/// Throws InputError when the stage-I design does not match the scheme.
void validate(const SamplingPlan &plan);

/// Builds a plan with the stage-I design the scheme requires.
SamplingPlan make_plan(SchemeId scheme, SurveyModuleSpec module, std::size_t stage_i_draws, std::uint64_t seed);

/// x_h = N_{h,total}, the number of members under 50.
std::vector<double> under50_size_measure(const PopulationFrame &frame);

/// Uniform random subset of min(n_I, N_I) households, without replacement.
StageISample srs_households(const PopulationFrame &frame, std::size_t n_I, Rng &rng);

/// m_I independent draws with P(h) = x_h / sum x.
StageISample ppswr_households(const PopulationFrame &frame, std::size_t m_I, std::span<const double> size_measure,
                              Rng &rng, std::string size_measure_name = "n_total_under50");

/// round() with halves away from zero.
long round_half_away(double value) noexcept;

/// Within-household proportional allocation n_h = round(N_h n_target / N_{s_I}),
/// SRS without replacement inside each household; census when N_{s_I} <= n_target.
StageIISample stratified_within(const GroupIndex &index, const StageISample &stage_i, int n_target, Rng &rng);

/// 1-based positions ceil(offset + (j - 1) a), j = 1..n_target, with a = population / n_target.
std::vector<std::size_t> fractional_interval_positions(std::size_t population, std::size_t n_target, double offset);

/// Fractional-interval systematic sample of n_target persons over a random
/// ordering of households and of eligible members within each household.
/// Census when N_{s_I} <= n_target.
StageIISample systematic_within(const GroupIndex &index, const StageISample &stage_i, int n_target, Rng &rng);

/// Thins r_I to n_target draw instances when n_target < m_I, then picks one
/// eligible member uniformly per retained instance. Repeat picks collapse.
StageIISample pps_within(const GroupIndex &index, const StageISample &stage_i, int n_target, Rng &rng);

/// The heads of the unique stage-I households.
StageIISample select_household_heads(const PopulationFrame &frame, const StageISample &stage_i);

/// SRS without replacement of min(n_target, N) eligible persons from the whole frame.
StageIISample srs_persons_within(const GroupIndex &index, int n_target, Rng &rng);

/// PPS stage I, then an SRS stage I with n_I = number of unique PPS households.
std::pair<StageISample, StageISample> pair_household_designs(const PopulationFrame &frame, std::size_t m_I,
                                                             std::span<const double> size_measure, Rng &rng);

/// Stage II for a person-level module under `scheme`.
StageIISample draw_stage_ii(SchemeId scheme, const GroupIndex &index, const StageISample &stage_i, int n_target,
                            Rng &rng);

/// Both stages of `plan` from its own seed.
struct PlannedSample {
    std::optional<StageISample> stage_i;
    StageIISample stage_ii;
};
PlannedSample draw_plan(const PopulationFrame &frame, const GroupIndex &index, const SamplingPlan &plan);

/// Manifest rows `scheme,module,household_id,person_id,k_h,n_h`: one row per
/// allocated household (person_id blank) followed by its selected persons
/// (k_h and n_h blank). k_h is blank for SRS designs.
void write_manifest_header(std::ostream &out);
void write_manifest_rows(std::ostream &out, const PopulationFrame &frame, std::string_view scheme,
                         std::string_view module, const StageIISample &sample);

} // namespace frame_sampler
