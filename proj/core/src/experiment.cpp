#include "frame_sampler/experiment.hpp"

#include "frame_sampler/csv.hpp"
#include "frame_sampler/errors.hpp"
#include "frame_sampler/parallel.hpp"
#include "frame_sampler/population_io.hpp"
#include "frame_sampler/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <tuple>

namespace frame_sampler {

std::string_view to_string(PopulationMode mode) noexcept {
    return mode == PopulationMode::fixed ? "fixed" : "regenerate";
}

PopulationMode parse_population_mode(std::string_view name) {
    if (name == "fixed") {
        return PopulationMode::fixed;
    }
    if (name == "regenerate") {
        return PopulationMode::regenerate;
    }
    throw ConfigError("population_mode must be fixed or regenerate, got '" + std::string{name} + "'");
}

namespace {

std::filesystem::path resolve(const std::filesystem::path &base, const std::string &text) {
    const std::filesystem::path p{text};
    return p.is_absolute() || base.empty() ? p : base / p;
}

std::size_t positive(const ConfigFile &config, std::string_view section, std::string_view key, long long fallback,
                     bool allow_zero = false) {
    const auto value = config.get_int(section, key, fallback);
    if (value < 0 || (!allow_zero && value == 0)) {
        throw ConfigError(config.source() + ": [" + std::string{section} + "] " + std::string{key} +
                          " must be positive");
    }
    return static_cast<std::size_t>(value);
}

SurveyModuleSpec read_module(const ConfigFile &config, const std::string &section, SurveyModuleSpec base) {
    config.require_known_keys(section, {"target_group", "n_target", "outcome", "level"});
    if (auto v = config.get(section, "target_group")) {
        base.target_group = parse_target_group(*v);
    }
    base.n_target = static_cast<int>(positive(config, section, "n_target", base.n_target));
    base.outcome_name = config.get_string(section, "outcome", base.outcome_name);
    if (auto v = config.get(section, "level")) {
        base.level = parse_outcome_level(*v);
    } else if (base.target_group == TargetGroup::household_heads) {
        base.level = OutcomeLevel::household;
    }
    if (base.outcome_name.empty()) {
        throw ConfigError(config.source() + ": [" + section + "] needs an outcome");
    }
    return base;
}

} // namespace

ExperimentConfig parse_experiment_config(const ConfigFile &config, const std::filesystem::path &base_dir) {
    ExperimentConfig out;
    const std::string ex = "experiment";
    config.require_known_keys(ex, {"reps", "seed", "schemes", "modules", "inference", "population_mode",
                                   "mcmc_iters", "mcmc_burn_in", "mcmc_chains", "mcmc_thin", "weight_mc_reps",
                                   "stage_i_draws", "population", "households", "consumption_model",
                                   "consumption_estimand", "srs_persons_model", "dump_samples"});

    if (auto path = config.get(ex, "population")) {
        out.population_csv = resolve(base_dir, *path);
        if (auto hh = config.get(ex, "households")) {
            out.household_csv = resolve(base_dir, *hh);
        }
        out.population_mode = PopulationMode::fixed;
    } else {
        out.population = parse_population_config(config);
    }
    if (auto mode = config.get(ex, "population_mode")) {
        out.population_mode = parse_population_mode(*mode);
    }

    out.reps = positive(config, ex, "reps", static_cast<long long>(out.reps));
    const auto seed = config.get_int(ex, "seed", 1);
    if (seed < 0) {
        throw ConfigError(config.source() + ": seed must be non-negative");
    }
    out.seed = static_cast<std::uint64_t>(seed);

    if (auto list = config.get(ex, "schemes")) {
        out.schemes.clear();
        for (const auto &name : split_list(*list)) {
            out.schemes.push_back(parse_scheme(name));
        }
    }

    // Module catalogue: defaults, overridden or extended by [module.<name>] blocks.
    auto catalogue = default_modules();
    for (const auto &section : config.sections_with_prefix("module.")) {
        const auto name = section.substr(std::string_view{"module."}.size());
        auto it = std::find_if(catalogue.begin(), catalogue.end(),
                               [&](const SurveyModuleSpec &m) { return m.module_name == name; });
        if (it != catalogue.end()) {
            *it = read_module(config, section, *it);
        } else {
            SurveyModuleSpec fresh;
            fresh.module_name = name;
            catalogue.push_back(read_module(config, section, fresh));
        }
    }
    if (auto list = config.get(ex, "modules")) {
        out.modules.clear();
        for (const auto &name : split_list(*list)) {
            auto it = std::find_if(catalogue.begin(), catalogue.end(),
                                   [&](const SurveyModuleSpec &m) { return m.module_name == name; });
            if (it == catalogue.end()) {
                throw ConfigError(config.source() + ": unknown module '" + name + "'");
            }
            out.modules.push_back(*it);
        }
    } else {
        out.modules = catalogue;
    }

    const auto inference = config.get_string(ex, "inference", "design");
    if (inference == "design") {
        out.run_design = true;
        out.run_model = false;
    } else if (inference == "model") {
        out.run_design = false;
        out.run_model = true;
    } else if (inference == "both") {
        out.run_design = true;
        out.run_model = true;
    } else {
        throw ConfigError(config.source() + ": inference must be design, model or both, got '" + inference + "'");
    }

    const auto iters = positive(config, ex, "mcmc_iters", 3000);
    out.mcmc.burn_in = positive(config, ex, "mcmc_burn_in", static_cast<long long>(iters / 3), true);
    if (out.mcmc.burn_in >= iters) {
        throw ConfigError(config.source() + ": mcmc_burn_in must be below mcmc_iters");
    }
    out.mcmc.thin = positive(config, ex, "mcmc_thin", 1);
    out.mcmc.draws = (iters - out.mcmc.burn_in) / out.mcmc.thin;
    out.mcmc.chains = positive(config, ex, "mcmc_chains", 2);
    validate(out.mcmc);

    out.weight_mc_reps = positive(config, ex, "weight_mc_reps", static_cast<long long>(out.weight_mc_reps));
    out.stage_i_draws = positive(config, ex, "stage_i_draws", static_cast<long long>(out.stage_i_draws));

    bool generated_log = true;
    for (const auto &[name, params] : out.population.outcomes) {
        if (params.level == OutcomeLevel::household) {
            generated_log = params.log_scale;
        }
    }
    const auto consumption = config.get_string(ex, "consumption_model", generated_log ? "log" : "linear");
    if (consumption != "log" && consumption != "linear") {
        throw ConfigError(config.source() + ": consumption_model must be log or linear");
    }
    out.log_consumption = consumption == "log";
    const auto estimand = config.get_string(ex, "consumption_estimand", "mean");
    if (estimand != "mean" && estimand != "mean_log") {
        throw ConfigError(config.source() + ": consumption_estimand must be mean or mean_log");
    }
    out.log_scale_estimand = estimand == "mean_log";
    if (out.log_scale_estimand && !out.log_consumption) {
        throw ConfigError(config.source() + ": consumption_estimand = mean_log needs consumption_model = log");
    }
    out.srs_persons_model = parse_model_family(config.get_string(ex, "srs_persons_model", "simple_normal"));
    if (out.srs_persons_model == ModelFamily::household_regression) {
        throw ConfigError(config.source() + ": srs_persons_model must be simple_normal or hierarchical");
    }
    out.dump_samples = config.get_bool(ex, "dump_samples", false);

    if (config.has_section("calibration")) {
        config.require_known_keys("calibration", {"scheme", "module", "reps", "seed"});
        CalibrationSettings cal;
        cal.scheme = parse_scheme(config.get_string("calibration", "scheme", "srs_systematic"));
        cal.module = config.get_string("calibration", "module", out.modules.empty() ? "" : out.modules.front().module_name);
        cal.reps = positive(config, "calibration", "reps", 200);
        const auto cal_seed = config.get_int("calibration", "seed", seed);
        if (cal_seed < 0) {
            throw ConfigError(config.source() + ": calibration seed must be non-negative");
        }
        cal.seed = static_cast<std::uint64_t>(cal_seed);
        if (std::none_of(catalogue.begin(), catalogue.end(),
                         [&](const SurveyModuleSpec &m) { return m.module_name == cal.module; })) {
            throw ConfigError(config.source() + ": unknown calibration module '" + cal.module + "'");
        }
        out.calibration = cal;
        // The calibration module must be resolvable even when not in the grid.
        if (std::none_of(out.modules.begin(), out.modules.end(),
                         [&](const SurveyModuleSpec &m) { return m.module_name == cal.module; })) {
            out.modules.push_back(*std::find_if(catalogue.begin(), catalogue.end(),
                                                [&](const SurveyModuleSpec &m) { return m.module_name == cal.module; }));
        }
    }
    validate(out);
    return out;
}

ExperimentConfig load_experiment_config(const std::filesystem::path &path) {
    return parse_experiment_config(ConfigFile::load(path), path.parent_path());
}

void validate(const ExperimentConfig &config) {
    if (config.reps == 0) {
        throw ConfigError("experiment needs at least one replication");
    }
    if (config.schemes.empty() || config.modules.empty()) {
        throw ConfigError("experiment needs at least one scheme and one module");
    }
    if (!config.run_design && !config.run_model) {
        throw ConfigError("experiment needs at least one inference paradigm");
    }
    if (config.population_csv && config.population_mode == PopulationMode::regenerate) {
        throw ConfigError("population_mode = regenerate needs a generator, not a population file");
    }
    for (const auto &m : config.modules) {
        if (m.n_target < 1) {
            throw ConfigError("module " + m.module_name + " needs a positive n_target");
        }
    }
    validate(config.mcmc);
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t rep) noexcept {
    return derive_seed(master, static_cast<std::uint64_t>(rep));
}

namespace {

std::string stream_label(std::string_view kind, SchemeId scheme, const SurveyModuleSpec &module) {
    return std::string{kind} + '.' + std::string{to_string(scheme)} + '.' + module.module_name;
}

WithinScheme within_of(SchemeId scheme) {
    return scheme == SchemeId::srs_stratified ? WithinScheme::stratified : WithinScheme::systematic;
}

bool needs_household_inclusion(SchemeId scheme, const SurveyModuleSpec &module) {
    return module.level == OutcomeLevel::person &&
           (scheme == SchemeId::srs_systematic || scheme == SchemeId::srs_stratified);
}

/// Per-population state shared by every scheme and module of a replication.
struct PopulationState {
    PopulationFrame frame;
    std::vector<double> size_measure;
    std::vector<GroupIndex> indexes;                  // per module
    std::vector<std::vector<double>> values;          // per module
    std::map<std::pair<std::size_t, SchemeId>, std::vector<InclusionResult>> inclusion;

    void prepare(const ExperimentConfig &config, std::uint64_t weight_seed) {
        size_measure = under50_size_measure(frame);
        indexes.clear();
        values.clear();
        inclusion.clear();
        for (const auto &module : config.modules) {
            indexes.emplace_back(frame, module.target_group);
            values.push_back(population_values(frame, indexes.back(), module));
        }
        for (std::size_t m = 0; m < config.modules.size(); ++m) {
            for (auto scheme : config.schemes) {
                if (!config.run_design || !needs_household_inclusion(scheme, config.modules[m])) {
                    continue;
                }
                Rng rng{derive_seed(weight_seed, stream_label("weights", scheme, config.modules[m]))};
                inclusion[{m, scheme}] =
                    srs_scheme_inclusion_all(indexes[m], config.stage_i_draws, config.modules[m].n_target,
                                             within_of(scheme), config.weight_mc_reps, rng);
            }
        }
    }
};

PopulationFrame source_population(const ExperimentConfig &config, std::uint64_t seed) {
    if (config.population_csv) {
        auto frame = config.household_csv ? read_population_files(*config.population_csv, *config.household_csv)
                                          : read_population_files(*config.population_csv, std::nullopt);
        const auto issues = validate_frame(frame, config.modules);
        if (!issues.empty()) {
            throw InputError("population file " + config.population_csv->string() + ": " + issues.front().message +
                             (issues.size() > 1 ? " (and " + std::to_string(issues.size() - 1) + " more issues)" : ""));
        }
        return frame;
    }
    return generate_population(config.population, config.modules, seed);
}

} // namespace

PopulationFrame experiment_population(const ExperimentConfig &config) {
    return source_population(config, derive_seed(config.seed, "population"));
}

ModelSpec experiment_model(const ExperimentConfig &config, const SurveyModuleSpec &module, SchemeId scheme) {
    auto spec = default_model_for(module, scheme, config.log_consumption);
    if (scheme == SchemeId::srs_persons && module.level == OutcomeLevel::person &&
        config.srs_persons_model == ModelFamily::hierarchical) {
        spec = hierarchical_model();
    }
    spec.log_scale_estimand = spec.log_response && config.log_scale_estimand;
    return spec;
}

namespace {

struct RepOutput {
    std::vector<ResultRow> results;
    std::vector<FailureRow> failures;
    std::vector<TruthRow> truth;
    std::vector<DiagnosticRow> diagnostics;
    std::string manifest;
    std::string weighted;
};

std::string prefix_rows(const std::string &rows, std::size_t rep) {
    std::string out;
    std::istringstream in{rows};
    std::string line;
    while (std::getline(in, line)) {
        out += std::to_string(rep) + ',' + line + '\n';
    }
    return out;
}

void run_replication(const ExperimentConfig &config, const PopulationState *fixed, std::size_t rep, RepOutput &out) {
    const auto seed = replication_seed(config.seed, rep);
    PopulationState local;
    const PopulationState *pop = fixed;
    if (pop == nullptr) {
        try {
            local.frame = source_population(config, derive_seed(seed, "population"));
            local.prepare(config, seed);
        } catch (const std::exception &e) {
            for (auto scheme : config.schemes) {
                for (const auto &module : config.modules) {
                    for (auto inf : {Inference::design, Inference::model}) {
                        if ((inf == Inference::design && config.run_design) ||
                            (inf == Inference::model && config.run_model)) {
                            out.failures.push_back({rep, scheme, module.module_name, inf,
                                                    std::string{"population: "} + e.what()});
                        }
                    }
                }
            }
            return;
        }
        pop = &local;
    }
    const auto &frame = pop->frame;

    for (std::size_t m = 0; m < config.modules.size(); ++m) {
        out.truth.push_back({rep, config.modules[m].module_name, stats::mean(pop->values[m])});
    }

    // Stage-I samples shared by every module of this replication.
    std::optional<StageISample> srs_stage;
    std::optional<StageISample> pps_stage;
    std::optional<std::pair<StageISample, StageISample>> paired;
    auto srs_stage_i = [&]() -> const StageISample & {
        if (!srs_stage) {
            Rng rng{derive_seed(seed, "stage_i.srs")};
            srs_stage = srs_households(frame, config.stage_i_draws, rng);
        }
        return *srs_stage;
    };
    auto pps_stage_i = [&]() -> const StageISample & {
        if (!pps_stage) {
            Rng rng{derive_seed(seed, "stage_i.pps")};
            pps_stage = ppswr_households(frame, config.stage_i_draws, pop->size_measure, rng);
        }
        return *pps_stage;
    };
    auto household_pair = [&]() -> const std::pair<StageISample, StageISample> & {
        if (!paired) {
            Rng rng{derive_seed(seed, "stage_i.household_pair")};
            paired = pair_household_designs(frame, config.stage_i_draws, pop->size_measure, rng);
        }
        return *paired;
    };

    for (auto scheme : config.schemes) {
        for (std::size_t m = 0; m < config.modules.size(); ++m) {
            const auto &module = config.modules[m];
            const auto &index = pop->indexes[m];
            auto fail_all = [&](const std::string &message) {
                if (config.run_design) {
                    out.failures.push_back({rep, scheme, module.module_name, Inference::design, message});
                }
                if (config.run_model) {
                    out.failures.push_back({rep, scheme, module.module_name, Inference::model, message});
                }
            };

            const StageISample *stage_i = nullptr;
            StageIISample stage_ii;
            try {
                Rng rng{derive_seed(seed, stream_label("stage_ii", scheme, module))};
                if (scheme == SchemeId::srs_persons) {
                    stage_ii = srs_persons_within(index, module.n_target, rng);
                } else if (module.level == OutcomeLevel::household) {
                    const auto &pair = household_pair();
                    stage_i = scheme == SchemeId::pps_one_per_draw ? &pair.first : &pair.second;
                    stage_ii = select_household_heads(frame, *stage_i);
                } else {
                    stage_i = scheme == SchemeId::pps_one_per_draw ? &pps_stage_i() : &srs_stage_i();
                    stage_ii = draw_stage_ii(scheme, index, *stage_i, module.n_target, rng);
                }
            } catch (const std::exception &e) {
                fail_all(std::string{"sampling: "} + e.what());
                continue;
            }
            std::string sample_flags;
            for (const auto &w : stage_ii.warnings) {
                sample_flags += sample_flags.empty() ? w : ";" + w;
            }
            std::size_t households = 0;
            for (const auto &a : stage_ii.allocation) {
                households += a.n_h > 0 ? 1 : 0;
            }

            if (config.dump_samples) {
                std::ostringstream manifest;
                write_manifest_rows(manifest, frame, to_string(scheme), module.module_name, stage_ii);
                out.manifest += prefix_rows(manifest.str(), rep);
            }

            auto add_flags = [&](std::string flags) {
                if (sample_flags.empty()) {
                    return flags;
                }
                return flags.empty() ? sample_flags : sample_flags + ";" + flags;
            };

            if (config.run_design) {
                try {
                    DesignContext ctx;
                    ctx.frame = &frame;
                    ctx.index = &index;
                    ctx.module = &module;
                    ctx.scheme = scheme;
                    ctx.stage_i = stage_i;
                    ctx.size_measure = pop->size_measure;
                    if (auto it = pop->inclusion.find({m, scheme}); it != pop->inclusion.end()) {
                        ctx.household_inclusion = it->second;
                    }
                    const auto weighted = design_weights(ctx, stage_ii);
                    if (config.dump_samples) {
                        std::ostringstream rows;
                        write_weighted_rows(rows, to_string(scheme), module.module_name, weighted);
                        out.weighted += prefix_rows(rows.str(), rep);
                    }
                    auto record = design_estimate(weighted, module.level);
                    record.scheme = scheme;
                    record.module_name = module.module_name;
                    record.replication_id = rep;
                    record.flags = add_flags(record.flags);
                    out.results.push_back({record, households});
                } catch (const std::exception &e) {
                    out.failures.push_back({rep, scheme, module.module_name, Inference::design, e.what()});
                }
            }

            if (config.run_model) {
                try {
                    const auto spec = experiment_model(config, module, scheme);
                    const auto data = make_model_data(frame, module, unweighted_sample(frame, module, stage_ii));
                    const auto posterior =
                        mcmc_fit(frame, index, data, spec, config.mcmc, derive_seed(seed, stream_label("mcmc", scheme, module)));
                    Rng rng{derive_seed(seed, stream_label("impute", scheme, module))};
                    const auto fp = finite_population_mean_draws(posterior, frame, index, data, rng);

                    EstimateRecord record;
                    record.scheme = scheme;
                    record.module_name = module.module_name;
                    record.inference = Inference::model;
                    record.replication_id = rep;
                    record.n = data.observation_count();
                    record.estimate = fp.mean;
                    record.variance = fp.variance;
                    std::string flags = posterior.converged ? "" : "rhat";
                    if (module.level == OutcomeLevel::person && !spec.log_scale_estimand) {
                        try {
                            const auto d = model_design_effect(fp, pop->values[m], record.n);
                            record.deff = d.deff;
                            record.n_eff = d.n_eff;
                            if (!d.n_eff) {
                                flags += flags.empty() ? "deff_zero" : ";deff_zero";
                            }
                        } catch (const std::logic_error &) {
                            flags += flags.empty() ? "deff_undefined" : ";deff_undefined";
                        }
                    }
                    record.flags = add_flags(flags);
                    for (const auto &d : posterior.diagnostics) {
                        out.diagnostics.push_back({rep, scheme, module.module_name, d});
                    }
                    out.results.push_back({record, households});
                } catch (const std::exception &e) {
                    out.failures.push_back({rep, scheme, module.module_name, Inference::model, e.what()});
                }
            }
        }
    }
}

/// Free text in a CSV field: separators and line breaks become spaces.
std::string plain_text(std::string text) {
    std::replace_if(text.begin(), text.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ' ');
    return text;
}

std::string optional_field(const std::optional<double> &v) {
    return v ? csv::format_double(*v) : std::string{};
}

void write_file(const std::filesystem::path &path, const std::function<void(std::ostream &)> &body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write " + path.string());
    }
    body(out);
    if (!out) {
        throw InputError("failed writing " + path.string());
    }
}

} // namespace

ExperimentOutput run_experiment(const ExperimentConfig &config, std::size_t threads) {
    validate(config);
    std::optional<PopulationState> fixed;
    if (config.population_mode == PopulationMode::fixed) {
        fixed.emplace();
        fixed->frame = experiment_population(config);
        fixed->prepare(config, config.seed);
    }

    std::vector<RepOutput> reps(config.reps);
    parallel_for(config.reps, threads, [&](std::size_t r) {
        run_replication(config, fixed ? &*fixed : nullptr, r, reps[r]);
    });

    ExperimentOutput out;
    for (auto &r : reps) {
        std::move(r.results.begin(), r.results.end(), std::back_inserter(out.results));
        std::move(r.failures.begin(), r.failures.end(), std::back_inserter(out.failures));
        std::move(r.truth.begin(), r.truth.end(), std::back_inserter(out.truth));
        std::move(r.diagnostics.begin(), r.diagnostics.end(), std::back_inserter(out.diagnostics));
        out.manifest_rows += r.manifest;
        out.weighted_rows += r.weighted;
    }
    return out;
}

void write_results_csv(std::ostream &out, const std::vector<ResultRow> &rows) {
    out << "rep,scheme,module,inference,n,households,estimate,variance,deff,n_eff,flags\n";
    for (const auto &row : rows) {
        const auto &r = row.record;
        csv::write_row(out, {std::to_string(r.replication_id), std::string{to_string(r.scheme)}, r.module_name,
                             std::string{to_string(r.inference)}, std::to_string(r.n), std::to_string(row.households),
                             csv::format_double(r.estimate), csv::format_double(r.variance), optional_field(r.deff),
                             optional_field(r.n_eff), plain_text(r.flags)});
    }
}

std::vector<ResultRow> read_results_csv(std::istream &in) {
    const auto table = csv::read_table(in, "results");
    const auto c_rep = table.column("rep", "results");
    const auto c_scheme = table.column("scheme", "results");
    const auto c_module = table.column("module", "results");
    const auto c_inf = table.column("inference", "results");
    const auto c_n = table.column("n", "results");
    const auto c_hh = table.column("households", "results");
    const auto c_est = table.column("estimate", "results");
    const auto c_var = table.column("variance", "results");
    const auto c_deff = table.column("deff", "results");
    const auto c_neff = table.column("n_eff", "results");
    const auto c_flags = table.column("flags", "results");
    std::vector<ResultRow> rows;
    for (const auto &fields : table.rows) {
        ResultRow row;
        auto &r = row.record;
        r.replication_id = static_cast<std::size_t>(csv::parse_integer(fields[c_rep]));
        r.scheme = parse_scheme(fields[c_scheme]);
        r.module_name = fields[c_module];
        r.inference = parse_inference(fields[c_inf]);
        r.n = static_cast<std::size_t>(csv::parse_integer(fields[c_n]));
        row.households = static_cast<std::size_t>(csv::parse_integer(fields[c_hh]));
        r.estimate = csv::parse_double(fields[c_est]);
        r.variance = csv::parse_double(fields[c_var]);
        if (!fields[c_deff].empty()) {
            r.deff = csv::parse_double(fields[c_deff]);
        }
        if (!fields[c_neff].empty()) {
            r.n_eff = csv::parse_double(fields[c_neff]);
        }
        r.flags = fields[c_flags];
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_truth_csv(std::ostream &out, const std::vector<TruthRow> &rows) {
    out << "rep,module,true_mean\n";
    for (const auto &t : rows) {
        csv::write_row(out, {std::to_string(t.rep), t.module, csv::format_double(t.true_mean)});
    }
}

std::vector<TruthRow> read_truth_csv(std::istream &in) {
    const auto table = csv::read_table(in, "truth");
    const auto c_rep = table.column("rep", "truth");
    const auto c_module = table.column("module", "truth");
    const auto c_mean = table.column("true_mean", "truth");
    std::vector<TruthRow> rows;
    for (const auto &fields : table.rows) {
        rows.push_back({static_cast<std::size_t>(csv::parse_integer(fields[c_rep])), fields[c_module],
                        csv::parse_double(fields[c_mean])});
    }
    return rows;
}

void write_experiment(const ExperimentOutput &output, const std::filesystem::path &dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "results.csv", [&](std::ostream &o) { write_results_csv(o, output.results); });
    write_file(dir / "truth.csv", [&](std::ostream &o) { write_truth_csv(o, output.truth); });
    write_file(dir / "failures.csv", [&](std::ostream &o) {
        o << "rep,scheme,module,inference,error\n";
        for (const auto &f : output.failures) {
            csv::write_row(o, {std::to_string(f.rep), std::string{to_string(f.scheme)}, f.module,
                               std::string{to_string(f.inference)}, plain_text(f.error)});
        }
    });
    write_file(dir / "diagnostics.csv", [&](std::ostream &o) {
        o << "rep,scheme,module,param,rhat,ess\n";
        for (const auto &d : output.diagnostics) {
            csv::write_row(o, {std::to_string(d.rep), std::string{to_string(d.scheme)}, d.module, d.parameter.name,
                               csv::format_double(d.parameter.rhat), csv::format_double(d.parameter.ess)});
        }
    });
    write_file(dir / "summary.csv", [&](std::ostream &o) {
        const bool any_unflagged = std::any_of(output.results.begin(), output.results.end(),
                                               [](const ResultRow &r) { return r.record.flags.empty(); });
        write_summary_csv(o, any_unflagged ? summarize_results(output.results, output.truth, output.failures)
                                           : std::vector<SummaryRow>{});
    });
    if (!output.manifest_rows.empty() || !output.weighted_rows.empty()) {
        write_file(dir / "samples_manifest.csv", [&](std::ostream &o) {
            o << "rep,";
            write_manifest_header(o);
            o << output.manifest_rows;
        });
        write_file(dir / "samples_weighted.csv", [&](std::ostream &o) {
            o << "rep,";
            write_weighted_header(o);
            o << output.weighted_rows;
        });
    }
}

std::vector<SummaryRow> summarize_results(const std::vector<ResultRow> &rows, const std::vector<TruthRow> &truth,
                                          const std::vector<FailureRow> &failures) {
    using Key = std::tuple<SchemeId, std::string, Inference>;
    std::map<std::pair<std::size_t, std::string>, double> truth_of;
    for (const auto &t : truth) {
        truth_of[{t.rep, t.module}] = t.true_mean;
    }
    std::vector<Key> order;
    std::map<Key, std::vector<const ResultRow *>> groups;
    std::map<Key, std::size_t> failed;
    auto touch = [&](const Key &key) {
        if (!groups.contains(key)) {
            order.push_back(key);
            groups[key];
        }
    };
    for (const auto &row : rows) {
        const Key key{row.record.scheme, row.record.module_name, row.record.inference};
        touch(key);
        groups[key].push_back(&row);
    }
    for (const auto &f : failures) {
        const Key key{f.scheme, f.module, f.inference};
        touch(key);
        ++failed[key];
    }
    if (std::none_of(rows.begin(), rows.end(), [](const ResultRow &r) { return r.record.flags.empty(); })) {
        throw EstimationError("summary: every result row is flagged");
    }

    auto spread = [](std::vector<double> v) -> std::optional<Spread> {
        if (v.empty()) {
            return std::nullopt;
        }
        return Spread{stats::median(v), stats::quantile(v, 0.25), stats::quantile(v, 0.75)};
    };
    auto var_or_zero = [](const std::vector<double> &v) { return v.size() > 1 ? stats::variance(v) : 0.0; };

    std::vector<SummaryRow> out;
    for (const auto &key : order) {
        SummaryRow s;
        std::tie(s.scheme, s.module, s.inference) = key;
        const auto &members = groups[key];
        s.rows = members.size();
        s.failed = failed[key];
        std::vector<double> deff;
        std::vector<double> n;
        std::vector<double> n_eff;
        std::vector<double> est;
        std::vector<double> err;
        std::vector<double> var;
        bool all_truth = true;
        for (const auto *row : members) {
            const auto &r = row->record;
            if (!r.flags.empty()) {
                ++s.flagged;
                continue;
            }
            if (r.deff) {
                deff.push_back(*r.deff);
            }
            if (r.n_eff) {
                n_eff.push_back(*r.n_eff);
            }
            n.push_back(static_cast<double>(r.n));
            est.push_back(r.estimate);
            var.push_back(r.variance);
            if (auto it = truth_of.find({r.replication_id, r.module_name}); it != truth_of.end()) {
                err.push_back(r.estimate - it->second);
            } else {
                all_truth = false;
            }
        }
        s.deff = spread(deff);
        s.n = spread(n);
        s.n_eff = spread(n_eff);
        if (!est.empty()) {
            s.mean_estimate = stats::mean(est);
            s.empirical_variance = var_or_zero(est);
            s.mean_variance = stats::mean(var);
            if (all_truth) {
                s.bias = stats::mean(err);
                s.error_variance = var_or_zero(err);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_summary_csv(std::ostream &out, const std::vector<SummaryRow> &rows) {
    out << "scheme,module,inference,rows,flagged,failed,deff_median,deff_q25,deff_q75,n_median,n_q25,n_q75,"
           "n_eff_median,n_eff_q25,n_eff_q75,mean_estimate,bias,empirical_variance,error_variance,mean_variance\n";
    auto spread_fields = [](const std::optional<Spread> &s, std::vector<std::string> &f) {
        if (s) {
            f.push_back(csv::format_double(s->median));
            f.push_back(csv::format_double(s->q25));
            f.push_back(csv::format_double(s->q75));
        } else {
            f.insert(f.end(), 3, std::string{});
        }
    };
    for (const auto &s : rows) {
        std::vector<std::string> f{std::string{to_string(s.scheme)}, s.module, std::string{to_string(s.inference)},
                                   std::to_string(s.rows), std::to_string(s.flagged), std::to_string(s.failed)};
        spread_fields(s.deff, f);
        spread_fields(s.n, f);
        spread_fields(s.n_eff, f);
        const bool has_rows = s.rows > s.flagged;
        f.push_back(has_rows ? csv::format_double(s.mean_estimate) : "");
        f.push_back(optional_field(s.bias));
        f.push_back(has_rows ? csv::format_double(s.empirical_variance) : "");
        f.push_back(optional_field(s.error_variance));
        f.push_back(has_rows ? csv::format_double(s.mean_variance) : "");
        csv::write_row(out, f);
    }
}

} // namespace frame_sampler
