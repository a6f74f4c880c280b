#pragma once

#include "frame_sampler/config.hpp"
#include "frame_sampler/design_estimator.hpp"
#include "frame_sampler/model_estimator.hpp"
#include "frame_sampler/popgen.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace frame_sampler {

enum class PopulationMode { fixed, regenerate };

std::string_view to_string(PopulationMode mode) noexcept;
PopulationMode parse_population_mode(std::string_view name);

struct CalibrationSettings {
    SchemeId scheme = SchemeId::srs_systematic;
    std::string module;
    std::size_t reps = 200;
    std::uint64_t seed = 1;
};

struct ExperimentConfig {
    /// Generator settings; unused when population_csv is set.
    PopulationConfig population;
    std::optional<std::filesystem::path> population_csv;
    std::optional<std::filesystem::path> household_csv;
    PopulationMode population_mode = PopulationMode::regenerate;

    std::vector<SchemeId> schemes{SchemeId::srs_stratified, SchemeId::srs_systematic, SchemeId::pps_one_per_draw};
    std::vector<SurveyModuleSpec> modules = default_modules();
    bool run_design = true;
    bool run_model = false;

    std::size_t reps = 500;
    std::uint64_t seed = 1;
    std::size_t stage_i_draws = 300;
    std::size_t weight_mc_reps = 2000;
    McmcSettings mcmc;
    /// Household consumption is modelled on the log scale.
    bool log_consumption = true;
    /// Report mean log consumption instead of mean consumption.
    bool log_scale_estimand = false;
    ModelFamily srs_persons_model = ModelFamily::simple_normal;
    /// Write the selected units and weights of every replication.
    bool dump_samples = false;

    std::optional<CalibrationSettings> calibration;
};

/// Reads the `[experiment]`, `[module.<name>]` and `[calibration]` blocks plus
/// the generator keys. Relative CSV paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(const ConfigFile &config, const std::filesystem::path &base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path &path);

/// Throws ConfigError for an empty grid, R = 0, or a regenerate run without a generator.
void validate(const ExperimentConfig &config);

/// The population of a fixed-mode run: the population file, or the generator
/// seeded with derive_seed(seed, "population").
PopulationFrame experiment_population(const ExperimentConfig &config);

/// Model fitted to `module` under `scheme` with the run's consumption and
/// SRS-of-persons settings.
ModelSpec experiment_model(const ExperimentConfig &config, const SurveyModuleSpec &module, SchemeId scheme);

struct ResultRow {
    EstimateRecord record;
    std::size_t households = 0;
};

struct FailureRow {
    std::size_t rep = 0;
    SchemeId scheme = SchemeId::srs_systematic;
    std::string module;
    Inference inference = Inference::design;
    std::string error;
};

struct TruthRow {
    std::size_t rep = 0;
    std::string module;
    double true_mean = 0.0;
};

struct DiagnosticRow {
    std::size_t rep = 0;
    SchemeId scheme = SchemeId::srs_systematic;
    std::string module;
    ParameterDiagnostic parameter;
};

struct ExperimentOutput {
    std::vector<ResultRow> results;
    std::vector<FailureRow> failures;
    std::vector<TruthRow> truth;
    std::vector<DiagnosticRow> diagnostics;
    /// With dump_samples: `rep,`-prefixed manifest and weighted-sample rows.
    std::string manifest_rows;
    std::string weighted_rows;
};

/// Seed of replication r: derive_seed(master, r).
std::uint64_t replication_seed(std::uint64_t master, std::size_t rep) noexcept;

/// Runs every replication on up to `threads` workers. Rows come out in
/// replication order, then scheme, module and paradigm order, whatever the
/// worker count. Per-replication failures are recorded, never thrown.
ExperimentOutput run_experiment(const ExperimentConfig &config, std::size_t threads);

/// results.csv, truth.csv, failures.csv, diagnostics.csv, summary.csv and,
/// with dump_samples, samples_manifest.csv and samples_weighted.csv in `dir`.
void write_experiment(const ExperimentOutput &output, const std::filesystem::path &dir);

void write_results_csv(std::ostream &out, const std::vector<ResultRow> &rows);
std::vector<ResultRow> read_results_csv(std::istream &in);
void write_truth_csv(std::ostream &out, const std::vector<TruthRow> &rows);
std::vector<TruthRow> read_truth_csv(std::istream &in);

struct Spread {
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

struct SummaryRow {
    SchemeId scheme = SchemeId::srs_systematic;
    std::string module;
    Inference inference = Inference::design;
    std::size_t rows = 0;
    std::size_t flagged = 0;
    std::size_t failed = 0;
    std::optional<Spread> deff;
    std::optional<Spread> n;
    std::optional<Spread> n_eff;
    double mean_estimate = 0.0;
    /// Mean of estimate minus the replication's true mean; unset without truth.
    std::optional<double> bias;
    /// Variance of the estimates across replications.
    double empirical_variance = 0.0;
    /// Variance of estimate minus true mean; unset without truth.
    std::optional<double> error_variance;
    double mean_variance = 0.0;
};

/// Per scheme x module x paradigm over unflagged rows. Throws EstimationError
/// when every row is flagged.
std::vector<SummaryRow> summarize_results(const std::vector<ResultRow> &rows, const std::vector<TruthRow> &truth,
                                          const std::vector<FailureRow> &failures = {});

void write_summary_csv(std::ostream &out, const std::vector<SummaryRow> &rows);

} // namespace frame_sampler
