#include "frame_sampler/csv.hpp"
#include "frame_sampler/errors.hpp"
#include "frame_sampler/experiment.hpp"
#include "frame_sampler/parallel.hpp"
#include "frame_sampler/population_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace frame_sampler;

namespace {

std::size_t default_threads(std::size_t requested) {
    if (requested > 0) {
        return requested;
    }
    return worker_count(std::max(1U, std::thread::hardware_concurrency()));
}

int cmd_popgen(const fs::path &config_path, std::optional<std::uint64_t> seed, const fs::path &out) {
    auto config = load_experiment_config(config_path);
    if (config.population_csv) {
        throw ConfigError(config_path.string() + ": popgen needs generator settings, not a population file");
    }
    if (seed) {
        config.seed = *seed;
    }
    const auto frame = experiment_population(config);
    write_population_files(frame, out);
    std::cout << "wrote " << frame.household_count() << " households and " << frame.person_count() << " persons to "
              << out.string() << '\n';
    return 0;
}

int cmd_simulate(const fs::path &config_path, const fs::path &out, std::size_t threads) {
    const auto config = load_experiment_config(config_path);
    const auto output = run_experiment(config, default_threads(threads));
    write_experiment(output, out);
    std::cout << "wrote " << output.results.size() << " result rows (" << output.failures.size() << " failures) to "
              << out.string() << '\n';
    return 0;
}

int cmd_calibrate(const fs::path &config_path, const fs::path &out, std::size_t threads) {
    const auto config = load_experiment_config(config_path);
    if (!config.calibration) {
        throw ConfigError(config_path.string() + ": calibrate needs a [calibration] block");
    }
    const auto &cal = *config.calibration;
    const auto module = *std::find_if(config.modules.begin(), config.modules.end(),
                                      [&](const SurveyModuleSpec &m) { return m.module_name == cal.module; });
    const auto frame = experiment_population(config);
    const auto plan = make_plan(cal.scheme, module, config.stage_i_draws, cal.seed);
    const auto report = calibration_study(frame, plan, experiment_model(config, module, cal.scheme), config.mcmc,
                                          cal.reps, cal.seed, default_threads(threads));
    fs::create_directories(out);
    std::ofstream file(out / "calibration.csv", std::ios::binary);
    if (!file) {
        throw InputError("cannot write " + (out / "calibration.csv").string());
    }
    write_calibration_csv(file, report);
    std::cout << "ratio of mean posterior variance to variance of posterior means: " << report.ratio << " ("
              << report.failures << " failed replications)\n";
    return 0;
}

int cmd_summarize(const fs::path &in, const fs::path &out, std::optional<fs::path> truth,
                  std::optional<fs::path> failures) {
    std::ifstream results_file(in);
    if (!results_file) {
        throw InputError("cannot read results file " + in.string());
    }
    const auto rows = read_results_csv(results_file);
    if (!truth && fs::exists(in.parent_path() / "truth.csv")) {
        truth = in.parent_path() / "truth.csv";
    }
    std::vector<TruthRow> truth_rows;
    if (truth) {
        std::ifstream f(*truth);
        if (!f) {
            throw InputError("cannot read truth file " + truth->string());
        }
        truth_rows = read_truth_csv(f);
    }
    std::vector<FailureRow> failure_rows;
    if (!failures && fs::exists(in.parent_path() / "failures.csv")) {
        failures = in.parent_path() / "failures.csv";
    }
    if (failures) {
        std::ifstream f(*failures);
        if (!f) {
            throw InputError("cannot read failures file " + failures->string());
        }
        const auto table = csv::read_table(f, "failures");
        for (const auto &fields : table.rows) {
            failure_rows.push_back({static_cast<std::size_t>(csv::parse_integer(fields[table.column("rep")])),
                                    parse_scheme(fields[table.column("scheme")]), fields[table.column("module")],
                                    parse_inference(fields[table.column("inference")]),
                                    fields[table.column("error")]});
        }
    }
    const auto summary = summarize_results(rows, truth_rows, failure_rows);
    std::ofstream file(out, std::ios::binary);
    if (!file) {
        throw InputError("cannot write " + out.string());
    }
    write_summary_csv(file, summary);
    return 0;
}

int cmd_validate(const fs::path &persons, std::optional<fs::path> households, std::optional<fs::path> config_path) {
    const auto frame = read_population_files(persons, households);
    std::vector<SurveyModuleSpec> modules;
    if (config_path) {
        modules = load_experiment_config(*config_path).modules;
    }
    const auto issues = config_path ? validate_frame(frame, modules) : validate_frame(frame);
    for (const auto &issue : issues) {
        std::cerr << to_string(issue.kind) << ": " << issue.message << '\n';
    }
    if (!issues.empty()) {
        std::cerr << issues.size() << " issue(s) in " << persons.string() << '\n';
        return 1;
    }
    std::cout << persons.string() << ": " << frame.household_count() << " households, " << frame.person_count()
              << " persons, no issues\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Two-stage household survey simulation: population generation, sampling, design- and "
                 "model-based estimation"};
    app.require_subcommand(1);

    fs::path config;
    fs::path out;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
    fs::path in;
    std::optional<fs::path> truth;
    std::optional<fs::path> failures;
    fs::path population;
    std::optional<fs::path> households;
    std::optional<fs::path> validate_config;

    auto *popgen = app.add_subcommand("popgen", "Generate a synthetic population and write population.csv and "
                                                "households.csv");
    popgen->add_option("--config", config, "Generator config file")->required()->check(CLI::ExistingFile);
    popgen->add_option("--seed", seed, "Master seed (overrides [experiment] seed)");
    popgen->add_option("--out", out, "Output directory")->required();

    auto *simulate = app.add_subcommand("simulate", "Run the replication grid and write results, truth, failures, "
                                                    "diagnostics and summary CSVs");
    simulate->add_option("--config", config, "Experiment config file")->required()->check(CLI::ExistingFile);
    simulate->add_option("--out", out, "Output directory")->required();
    simulate->add_option("--threads", threads, "Worker threads (default: FRAME_SAMPLER_THREADS or all cores)");

    auto *calibrate = app.add_subcommand("calibrate", "Repeated sampling from one population: posterior variances "
                                                      "against the spread of posterior means");
    calibrate->add_option("--config", config, "Experiment config file with a [calibration] block")
        ->required()
        ->check(CLI::ExistingFile);
    calibrate->add_option("--out", out, "Output directory")->required();
    calibrate->add_option("--threads", threads, "Worker threads (default: FRAME_SAMPLER_THREADS or all cores)");

    auto *summarize = app.add_subcommand("summarize", "Summarize a results CSV per scheme, module and paradigm");
    summarize->add_option("--in", in, "results.csv from simulate")->required()->check(CLI::ExistingFile);
    summarize->add_option("--out", out, "Summary CSV to write")->required();
    summarize->add_option("--truth", truth, "truth.csv (default: next to --in when present)")
        ->check(CLI::ExistingFile);
    summarize->add_option("--failures", failures, "failures.csv (default: next to --in when present)")
        ->check(CLI::ExistingFile);

    auto *validate = app.add_subcommand("validate", "Check a population file for structural problems");
    validate->add_option("--population", population, "Person CSV")->required()->check(CLI::ExistingFile);
    validate->add_option("--households", households, "Household CSV")->check(CLI::ExistingFile);
    validate->add_option("--config", validate_config, "Experiment config; also checks module outcomes")
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*popgen) {
            return cmd_popgen(config, seed, out);
        }
        if (*simulate) {
            return cmd_simulate(config, out, threads);
        }
        if (*calibrate) {
            return cmd_calibrate(config, out, threads);
        }
        if (*summarize) {
            return cmd_summarize(in, out, truth, failures);
        }
        if (*validate) {
            return cmd_validate(population, households, validate_config);
        }
    } catch (const InputError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
