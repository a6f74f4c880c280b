#pragma once

#include "frame_sampler/frame.hpp"
#include "frame_sampler/random.hpp"
#include "frame_sampler/sampler.hpp"
#include "frame_sampler/weights.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace frame_sampler {

/// hierarchical: y_i ~ N(alpha_h, sigma_y), alpha_h ~ N(mu + x_h beta, sigma_alpha).
/// household_regression: t_h (or log t_h) ~ N(mu + x_h beta, s_h sigma_t) with
///   s_h = N_{h,total} for the unlogged response and 1 for the logged one.
/// simple_normal: y_i ~ N(mu, sigma_y) with no household structure.
enum class ModelFamily { hierarchical, household_regression, simple_normal };

std::string_view to_string(ModelFamily family) noexcept;
ModelFamily parse_model_family(std::string_view name);

/// Household covariates. `n_total` is the number of members under 50,
/// `n_group` the number of target-group members.
enum class Covariate { n_total, n_total_sq, n_group, n_group_sq };

std::string_view to_string(Covariate covariate) noexcept;

struct PriorSpec {
    /// mu and each beta ~ Normal(0, coefficient_sd_scale * sd(y)).
    double coefficient_sd_scale = 1e3;
    /// Flat prior on mu and beta instead.
    bool flat_coefficients = false;
    /// Every variance ~ inverse-Gamma(variance_shape, variance_scale);
    /// (0, 0) gives p(sigma^2) proportional to 1 / sigma^2.
    double variance_shape = 1e-3;
    double variance_scale = 1e-3;
};

struct ModelSpec {
    ModelFamily family = ModelFamily::hierarchical;
    std::vector<Covariate> covariates{Covariate::n_total, Covariate::n_total_sq, Covariate::n_group,
                                      Covariate::n_group_sq};
    /// household_regression only: model log t_h.
    bool log_response = false;
    /// household_regression with log_response: report mean log consumption
    /// instead of mean consumption.
    bool log_scale_estimand = false;
    PriorSpec prior;
    /// Held at the given value instead of sampled.
    std::optional<double> fixed_sigma_y;
    std::optional<double> fixed_sigma_alpha;
    std::optional<double> fixed_sigma_t;
    /// Hierarchical only: before each alpha draw, a random-walk Metropolis
    /// move on (log sigma_y^2, log sigma_alpha^2) with alpha integrated out.
    /// The proposal covariance adapts during burn-in only.
    bool variance_move = true;
};

/// Throws ConfigError when the covariate list does not fit the family.
void validate(const ModelSpec &spec);

ModelSpec hierarchical_model();
ModelSpec household_model(bool log_response);
ModelSpec simple_normal_model();

/// Model fitted for a module: household_regression for household-level
/// modules, simple_normal for srs_persons, hierarchical otherwise.
ModelSpec default_model_for(const SurveyModuleSpec &module, SchemeId scheme, bool log_consumption);

struct McmcSettings {
    std::size_t burn_in = 1000;
    std::size_t draws = 2000;
    std::size_t thin = 1;
    std::size_t chains = 2;
    double rhat_threshold = 1.05;
};

void validate(const McmcSettings &settings);

/// Observations grouped by household. For household-level modules each
/// group holds the single t_h.
struct ModelData {
    OutcomeLevel level = OutcomeLevel::person;
    /// Frame household indices, ascending.
    std::vector<std::size_t> households;
    std::vector<std::vector<double>> y;

    std::size_t observation_count() const;
};

/// Groups the rows of a sample by household; weights are ignored.
ModelData make_model_data(const PopulationFrame &frame, const SurveyModuleSpec &module,
                          const WeightedSample &sample);

/// Sample rows with unit weights, for model fits that never need design weights.
WeightedSample unweighted_sample(const PopulationFrame &frame, const SurveyModuleSpec &module,
                                 const StageIISample &sample);

/// Centered and scaled covariate design. Terms whose variable takes too few
/// distinct values over the relevant frame households are dropped (linear
/// needs 2, quadratic 3), as are target-group terms identical to the
/// under-50 terms.
struct CovariateBasis {
    std::vector<Covariate> active;
    double total_center = 0.0;
    double total_scale = 1.0;
    double group_center = 0.0;
    double group_scale = 1.0;

    /// 1 followed by the active terms.
    std::size_t width() const noexcept { return active.size() + 1; }
    std::vector<double> row(double n_total, double n_group) const;
    /// Raw-scale (mu, beta_{n_total}, beta_{n_total^2}, beta_{n_group}, beta_{n_group^2}).
    std::array<double, 5> raw_coefficients(std::span<const double> basis_coefficients) const;
};

CovariateBasis make_basis(const PopulationFrame &frame, const GroupIndex &index, const ModelSpec &spec);

struct ParameterDiagnostic {
    std::string name;
    double rhat = 1.0;
    double ess = 0.0;
};

struct PosteriorDraws {
    ModelSpec spec;
    CovariateBasis basis;
    /// Frame household indices of the fitted groups.
    std::vector<std::size_t> households;
    std::size_t chains = 0;
    std::size_t draws_per_chain = 0;
    std::size_t burn_in = 0;
    std::size_t thin = 1;

    /// Draw s of chain c is stored at c * draws_per_chain + s.
    /// Coefficients on the centered and scaled basis, one vector per draw.
    std::vector<std::vector<double>> basis_coefficients;
    /// Raw-scale mu and beta per draw, named by coefficient_names.
    std::vector<std::array<double, 5>> coefficients;
    std::vector<double> sigma_y;
    std::vector<double> sigma_alpha;
    std::vector<double> sigma_t;
    /// alpha per draw for each fitted household (hierarchical only).
    std::vector<std::vector<double>> alpha;

    std::vector<ParameterDiagnostic> diagnostics;
    double max_rhat = 1.0;
    bool converged = true;

    std::size_t size() const noexcept { return chains * draws_per_chain; }
};

inline constexpr std::array<std::string_view, 5> coefficient_names{"mu", "beta_n_total", "beta_n_total_sq",
                                                                   "beta_n_group", "beta_n_group_sq"};

/// Multi-chain Gibbs sampler. Chain c uses derive_seed(seed, c). Draws are
/// flagged (converged = false) when any sampled parameter has R-hat above the
/// threshold. Throws InputError for fewer than two households (hierarchical,
/// household_regression) or two observations (simple_normal).
PosteriorDraws mcmc_fit(const PopulationFrame &frame, const GroupIndex &index, const ModelData &data,
                        const ModelSpec &spec, const McmcSettings &settings, std::uint64_t seed);

/// Rows `chain,iter,param,value` for the scalar parameters.
void write_draws_csv(std::ostream &out, const PosteriorDraws &posterior);

struct FinitePopPosterior {
    std::vector<double> draws;
    double mean = 0.0;
    double variance = 0.0;
    /// Observed and imputed parts: draws[s] = (n / N) observed_mean + ((N - n) / N) imputed_mean[s].
    std::size_t observed_count = 0;
    std::size_t population_count = 0;
    double observed_mean = 0.0;
    std::vector<double> imputed_mean;
};

/// Posterior draws of the finite-population mean of the module outcome over
/// its target group (or over households for household-level modules).
/// Requires at least 100 retained draws.
FinitePopPosterior finite_population_mean_draws(const PosteriorDraws &posterior, const PopulationFrame &frame,
                                                const GroupIndex &index, const ModelData &data, Rng &rng);

/// (1 - n / N) S^2 / n with S^2 the population variance (divisor N - 1).
/// Throws InputError unless 2 <= n <= N.
double srs_fpc_variance(std::span<const double> population_values, std::size_t n);

struct ModelDesignEffect {
    double deff = 0.0;
    /// Unset when deff is 0.
    std::optional<double> n_eff;
};

/// Posterior variance over the finite-population-corrected SRS variance.
/// Throws EstimationError when the latter is zero.
ModelDesignEffect model_design_effect(const FinitePopPosterior &fp, std::span<const double> population_values,
                                      std::size_t n);

/// Outcome values of the module's population units: target-group members, or
/// households for household-level modules.
std::vector<double> population_values(const PopulationFrame &frame, const GroupIndex &index,
                                      const SurveyModuleSpec &module);

struct CalibrationRecord {
    std::size_t rep = 0;
    double posterior_mean = 0.0;
    double posterior_variance = 0.0;
    std::string flags;
};

struct CalibrationReport {
    SchemeId scheme = SchemeId::srs_systematic;
    std::string module_name;
    std::vector<CalibrationRecord> records;
    std::size_t failures = 0;
    double variance_of_means = 0.0;
    double mean_posterior_variance = 0.0;
    /// mean_posterior_variance / variance_of_means; NaN when the latter is 0.
    double ratio = 0.0;
    /// srs_persons only.
    std::optional<double> srs_fpc_reference;
    /// Share of posterior variances at or below the reference.
    std::optional<double> reference_quantile;
    double true_mean = 0.0;
};

/// Repeated sampling from one fixed population. Replication r draws with
/// plan seed derive_seed(seed, r) and fits with derive_seed(seed, "fit"), r.
/// Fit failures are counted and skipped. Requires at least 2 replications.
CalibrationReport calibration_study(const PopulationFrame &frame, const SamplingPlan &plan, const ModelSpec &spec,
                                    const McmcSettings &settings, std::size_t replications, std::uint64_t seed,
                                    std::size_t threads = 1);

/// Rows `rep,posterior_mean,posterior_variance,flags` followed by a
/// `# key,value` summary block.
void write_calibration_csv(std::ostream &out, const CalibrationReport &report);

} // namespace frame_sampler
