#pragma once

#include "frame_sampler/config.hpp"
#include "frame_sampler/frame.hpp"
#include "frame_sampler/random.hpp"

#include <array>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace frame_sampler {

struct FixedSize {
    int k = 1;
};

/// Poisson(lambda) conditioned on min <= size <= max.
struct TruncatedPoissonSize {
    double lambda = 4.0;
    int min = 1;
    int max = 30;
};

/// weights[i] is the relative frequency of household size i + 1.
struct EmpiricalSize {
    std::vector<double> weights;
};

using SizeDistribution = std::variant<FixedSize, TruncatedPoissonSize, EmpiricalSize>;

/// Age bands used by the generator: 0-5m, 6-59m, 5-14y, 15-49y, 50y+.
inline constexpr std::size_t age_band_count = 5;
inline constexpr std::array<std::pair<int, int>, age_band_count> age_band_months{{
    {0, 5},
    {6, 59},
    {60, 179},
    {180, 599},
    {600, 959},
}};

struct DemographyParams {
    int n_households = 600;
    SizeDistribution household_size = TruncatedPoissonSize{};
    std::array<double, age_band_count> age_band_probabilities{0.03, 0.15, 0.27, 0.43, 0.12};
    double p_female = 0.5;
};

/// Throws ConfigError for a non-simplex age distribution, a bad size
/// distribution, p_female outside [0, 1] or n_households < 1.
void validate(const DemographyParams &params);

/// Parameters of one generated outcome.
///
/// Person-level outcomes follow the random-intercept model
///   alpha_h ~ Normal(mu + beta1 N + beta2 N^2, sigma_alpha),  y_i ~ Normal(alpha_h, sigma_y)
/// with N = N_{h,total}. Household-level outcomes (consumption) follow
///   t_h ~ Normal(mu + beta1 N + beta2 N^2, N sigma_t)              (log_scale = false)
///   log t_h ~ Normal(mu + beta1 N + beta2 N^2, sigma_t)            (log_scale = true).
/// Every second Normal argument is a standard deviation.
struct OutcomeModelParams {
    OutcomeLevel level = OutcomeLevel::person;
    double mu = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double sigma_alpha = 0.0;
    double sigma_y = 0.0;
    double sigma_t = 0.0;
    bool log_scale = false;

    double mean_at(double n_total) const noexcept { return mu + beta1 * n_total + beta2 * n_total * n_total; }
};

void validate(const OutcomeModelParams &params);

/// Households with i.i.d. sizes, members with i.i.d. age band and sex and a
/// uniform age in months within the band. The oldest member is the head
/// (lowest person id on ties). Ids are sequential from 1.
PopulationFrame generate_demography(const DemographyParams &params, Rng &rng);

/// Fills `outcome_name` for members of `groups` (every person when `groups`
/// is empty); everyone else gets NaN. One alpha_h is drawn per household.
PopulationFrame generate_person_outcomes(PopulationFrame frame, const std::string &outcome_name,
                                         const OutcomeModelParams &params, std::span<const TargetGroup> groups,
                                         Rng &rng);

/// Fills household outcome `outcome_name` with total consumption t_h.
/// A household with N_{h,total} = 0 gets its mean exactly on the linear scale.
PopulationFrame generate_household_consumption(PopulationFrame frame, const std::string &outcome_name,
                                               const OutcomeModelParams &params, Rng &rng);

/// Posterior draws per named parameter, all arrays of equal length.
struct PosteriorSummary {
    std::map<std::string, std::vector<double>> draws;
};

inline constexpr std::size_t min_posterior_draws = 100;

/// Point parameters for simulation: each parameter's posterior median, except
/// that a parameter in `coefficient_names` whose central 50% interval
/// [Q25, Q75] contains 0 is set to 0.
std::map<std::string, double> zero_noisy_coefficients(const PosteriorSummary &posterior,
                                                      std::span<const std::string> coefficient_names);

/// Generator configuration read from a config file.
struct PopulationConfig {
    DemographyParams demography;
    std::vector<std::pair<std::string, OutcomeModelParams>> outcomes;
};

/// Reads the demography keys (top level or `[demography]`) and every
/// `[outcome.<name>]` block.
PopulationConfig parse_population_config(const ConfigFile &config);

/// Demography followed by each configured outcome. Person outcomes are filled
/// for the union of target groups of the modules that measure them (everyone
/// if no module does). Each outcome draws from its own sub-stream of `seed`.
PopulationFrame generate_population(const PopulationConfig &config, std::span<const SurveyModuleSpec> modules,
                                    std::uint64_t seed);

} // namespace frame_sampler
