#include "frame_sampler/errors.hpp"
#include "frame_sampler/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace frame_sampler;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string &text) {
    std::istringstream in(text);
    return parse_experiment_config(ConfigFile::parse(in, "inline.ini"));
}

const std::string small_population = R"(
[demography]
n_households = 60
[outcome.hemoglobin]
mu = 11
sigma_alpha = 0.8
sigma_y = 1
[outcome.consumption]
mu = 7
sigma_t = 0.5
log_scale = true
)";

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string &name) {
    const auto dir = fs::temp_directory_path() / ("frame_sampler_test_" + name);
    fs::remove_all(dir);
    return dir;
}

ResultRow design_row(SchemeId scheme, double estimate, double deff, std::string flags = {}) {
    ResultRow row;
    row.record.scheme = scheme;
    row.record.module_name = "m";
    row.record.n = 40;
    row.record.estimate = estimate;
    row.record.variance = 0.5;
    row.record.deff = deff;
    row.record.n_eff = 40.0 / deff;
    row.record.flags = std::move(flags);
    row.households = 12;
    return row;
}

} // namespace

TEST(ExperimentConfig, ParsesGridAndModules) {
    const auto cfg = parse(small_population + R"(
[experiment]
reps = 3
seed = 11
schemes = srs_systematic, pps_one_per_draw
modules = blood_under5, household_consumption
inference = both
population_mode = fixed
mcmc_iters = 900
[module.blood_under5]
n_target = 25
)");
    EXPECT_EQ(cfg.reps, 3U);
    EXPECT_EQ(cfg.seed, 11U);
    EXPECT_EQ(cfg.schemes, (std::vector<SchemeId>{SchemeId::srs_systematic, SchemeId::pps_one_per_draw}));
    ASSERT_EQ(cfg.modules.size(), 2U);
    EXPECT_EQ(cfg.modules[0].n_target, 25);
    EXPECT_TRUE(cfg.run_design);
    EXPECT_TRUE(cfg.run_model);
    EXPECT_EQ(cfg.population_mode, PopulationMode::fixed);
    EXPECT_EQ(cfg.mcmc.burn_in, 300U);
    EXPECT_EQ(cfg.mcmc.draws, 600U);
}

TEST(ExperimentConfig, RejectsBadInput) {
    EXPECT_THROW(parse(small_population + "[experiment]\nreps = 0\n"), ConfigError);
    EXPECT_THROW(parse(small_population + "[experiment]\nschemes = cluster\n"), InputError);
    EXPECT_THROW(parse(small_population + "[experiment]\nmodules = nothing\n"), ConfigError);
    EXPECT_THROW(parse(small_population + "[experiment]\nreplications = 4\n"), ConfigError);
    EXPECT_THROW(parse(small_population + "[experiment]\ninference = bayes\n"), InputError);
}

TEST(RunExperiment, SingleCellGivesOneRow) {
    const auto cfg = parse(small_population + R"(
[experiment]
reps = 1
schemes = srs_systematic
modules = blood_under5
inference = design
[module.blood_under5]
n_target = 30
)");
    const auto out = run_experiment(cfg, 1);
    ASSERT_EQ(out.results.size(), 1U);
    EXPECT_TRUE(out.failures.empty());
    EXPECT_EQ(out.results.front().record.scheme, SchemeId::srs_systematic);
    EXPECT_EQ(out.results.front().record.inference, Inference::design);
    EXPECT_EQ(out.truth.size(), 1U);
}

TEST(RunExperiment, RowCountConservation) {
    const auto cfg = parse(small_population + R"(
[experiment]
reps = 2
schemes = srs_stratified, srs_systematic, pps_one_per_draw, srs_persons
modules = blood_under5, household_consumption
inference = both
stage_i_draws = 20
mcmc_iters = 300
weight_mc_reps = 200
[module.blood_under5]
n_target = 30
[module.household_consumption]
n_target = 20
)");
    const auto out = run_experiment(cfg, 2);
    EXPECT_EQ(out.results.size() + out.failures.size(), 2U * 4U * 2U * 2U);
    for (const auto &row : out.results) {
        EXPECT_GE(row.record.variance, 0.0);
        if (row.record.deff && row.record.n_eff) {
            EXPECT_NEAR(*row.record.deff * *row.record.n_eff, static_cast<double>(row.record.n), 1e-6);
        }
    }
}

TEST(RunExperiment, OutputBytesIndependentOfWorkerCount) {
    const auto cfg = parse(small_population + R"(
[experiment]
reps = 4
seed = 5
schemes = srs_systematic, pps_one_per_draw, srs_persons
modules = blood_under5, household_consumption
inference = both
stage_i_draws = 20
mcmc_iters = 300
weight_mc_reps = 200
dump_samples = true
[module.blood_under5]
n_target = 30
)");
    const auto one = scratch("threads1");
    const auto many = scratch("threads4");
    write_experiment(run_experiment(cfg, 1), one);
    write_experiment(run_experiment(cfg, 4), many);
    std::size_t files = 0;
    for (const auto &entry : fs::directory_iterator(one)) {
        const auto other = many / entry.path().filename();
        ASSERT_TRUE(fs::exists(other)) << other;
        EXPECT_EQ(slurp(entry.path()), slurp(other)) << entry.path().filename();
        ++files;
    }
    EXPECT_EQ(files, 7U);
    fs::remove_all(one);
    fs::remove_all(many);
}

TEST(RunExperiment, FixedPopulationSharesTruth) {
    const auto cfg = parse(small_population + R"(
[experiment]
reps = 3
schemes = srs_persons
modules = blood_under5
population_mode = fixed
[module.blood_under5]
n_target = 20
)");
    const auto out = run_experiment(cfg, 1);
    ASSERT_EQ(out.truth.size(), 3U);
    EXPECT_EQ(out.truth[0].true_mean, out.truth[1].true_mean);
    EXPECT_EQ(out.truth[1].true_mean, out.truth[2].true_mean);

    auto regen = cfg;
    regen.population_mode = PopulationMode::regenerate;
    const auto fresh = run_experiment(regen, 1);
    EXPECT_NE(fresh.truth[0].true_mean, fresh.truth[1].true_mean);
}

TEST(ReplicationSeeds, DistinctAcrossRun) {
    std::set<std::uint64_t> seeds;
    for (std::size_t r = 0; r < 10000; ++r) {
        EXPECT_TRUE(seeds.insert(replication_seed(7, r)).second);
    }
}

TEST(ResultsCsv, RoundTrip) {
    std::vector<ResultRow> rows{design_row(SchemeId::srs_systematic, 1.25, 1.5),
                                design_row(SchemeId::pps_one_per_draw, -0.5, 0.75, "rhat")};
    rows[1].record.inference = Inference::model;
    rows[1].record.deff.reset();
    rows[1].record.n_eff.reset();
    rows[1].record.replication_id = 3;
    std::stringstream buf;
    write_results_csv(buf, rows);
    EXPECT_EQ(buf.str().substr(0, buf.str().find('\n')),
              "rep,scheme,module,inference,n,households,estimate,variance,deff,n_eff,flags");
    const auto back = read_results_csv(buf);
    ASSERT_EQ(back.size(), 2U);
    EXPECT_EQ(back[0].record.estimate, 1.25);
    EXPECT_EQ(back[0].record.deff, 1.5);
    EXPECT_EQ(back[1].record.inference, Inference::model);
    EXPECT_FALSE(back[1].record.deff.has_value());
    EXPECT_EQ(back[1].record.flags, "rhat");
    EXPECT_EQ(back[1].record.replication_id, 3U);
    EXPECT_EQ(back[1].households, 12U);
}

TEST(Summary, SingleRowEqualsItsValues) {
    const std::vector<ResultRow> rows{design_row(SchemeId::srs_systematic, 2.0, 1.6)};
    const std::vector<TruthRow> truth{{0, "m", 1.5}};
    const auto summary = summarize_results(rows, truth);
    ASSERT_EQ(summary.size(), 1U);
    const auto &s = summary.front();
    EXPECT_EQ(s.rows, 1U);
    EXPECT_DOUBLE_EQ(s.deff->median, 1.6);
    EXPECT_DOUBLE_EQ(s.deff->q25, 1.6);
    EXPECT_DOUBLE_EQ(s.deff->q75, 1.6);
    EXPECT_DOUBLE_EQ(s.n->median, 40.0);
    EXPECT_DOUBLE_EQ(s.n_eff->median, 25.0);
    EXPECT_DOUBLE_EQ(s.mean_estimate, 2.0);
    EXPECT_DOUBLE_EQ(*s.bias, 0.5);
    EXPECT_DOUBLE_EQ(s.empirical_variance, 0.0);
    EXPECT_DOUBLE_EQ(s.mean_variance, 0.5);
}

TEST(Summary, IdenticalRowsGiveIdenticalSummaries) {
    std::vector<ResultRow> rows;
    for (int r = 0; r < 5; ++r) {
        for (auto scheme : {SchemeId::srs_systematic, SchemeId::pps_one_per_draw}) {
            auto row = design_row(scheme, 1.0 + r, 1.0 + 0.1 * r);
            row.record.replication_id = static_cast<std::size_t>(r);
            rows.push_back(row);
        }
    }
    const auto summary = summarize_results(rows, {});
    ASSERT_EQ(summary.size(), 2U);
    EXPECT_EQ(summary[0].deff->median, summary[1].deff->median);
    EXPECT_EQ(summary[0].deff->q25, summary[1].deff->q25);
    EXPECT_EQ(summary[0].empirical_variance, summary[1].empirical_variance);
    EXPECT_EQ(summary[0].mean_estimate, summary[1].mean_estimate);
    EXPECT_FALSE(summary[0].bias.has_value());
}

TEST(Summary, FlaggedRowsAreCountedNotUsed) {
    std::vector<ResultRow> rows{design_row(SchemeId::srs_systematic, 1.0, 1.0),
                                design_row(SchemeId::srs_systematic, 100.0, 9.0, "rhat")};
    const auto summary = summarize_results(rows, {});
    ASSERT_EQ(summary.size(), 1U);
    EXPECT_EQ(summary[0].flagged, 1U);
    EXPECT_DOUBLE_EQ(summary[0].mean_estimate, 1.0);

    const std::vector<ResultRow> all_flagged{design_row(SchemeId::srs_systematic, 1.0, 1.0, "rhat")};
    EXPECT_THROW(summarize_results(all_flagged, {}), EstimationError);
}
