#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string output;
};

Run cli(const std::string &args) {
    const auto log = fs::temp_directory_path() / "frame_sampler_cli_test.log";
    const std::string command = std::string("\"") + FRAME_SAMPLER_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(command.c_str());
    Run run;
    run.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::ostringstream text;
    text << in.rdbuf();
    run.output = text.str();
    return run;
}

fs::path scratch(const std::string &name) {
    const auto dir = fs::temp_directory_path() / ("frame_sampler_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

const std::string smoke = std::string(FRAME_SAMPLER_CONFIG_DIR) + "/smoke.ini";

} // namespace

TEST(Cli, HelpExitsZero) {
    const auto run = cli("--help");
    EXPECT_EQ(run.code, 0);
    EXPECT_NE(run.output.find("simulate"), std::string::npos);
}

TEST(Cli, UnknownFlagExitsOne) {
    EXPECT_EQ(cli("simulate --bogus").code, 1);
}

TEST(Cli, MissingConfigNamesThePath) {
    const auto run = cli("simulate --config /nonexistent/exp.ini --out /tmp/x");
    EXPECT_EQ(run.code, 1);
    EXPECT_NE(run.output.find("/nonexistent/exp.ini"), std::string::npos) << run.output;
}

TEST(Cli, PopgenThenValidate) {
    const auto dir = scratch("popgen");
    ASSERT_EQ(cli("popgen --config \"" + smoke + "\" --out \"" + dir.string() + "\"").code, 0);
    ASSERT_TRUE(fs::exists(dir / "population.csv"));
    ASSERT_TRUE(fs::exists(dir / "households.csv"));
    const auto ok = cli("validate --population \"" + (dir / "population.csv").string() + "\" --households \"" +
                        (dir / "households.csv").string() + "\" --config \"" + smoke + "\"");
    EXPECT_EQ(ok.code, 0) << ok.output;

    std::ofstream broken(dir / "broken.csv");
    broken << "household_id,person_id,age_months,sex,is_head\n1,1,30,F,0\n1,2,400,M,0\n";
    broken.close();
    const auto bad = cli("validate --population \"" + (dir / "broken.csv").string() + "\"");
    EXPECT_EQ(bad.code, 1);
    EXPECT_NE(bad.output.find("no_head"), std::string::npos) << bad.output;
    fs::remove_all(dir);
}

TEST(Cli, SimulateAndSummarize) {
    const auto dir = scratch("simulate");
    const auto run = cli("simulate --config \"" + smoke + "\" --out \"" + dir.string() + "\" --threads 2");
    ASSERT_EQ(run.code, 0) << run.output;
    for (const char *name : {"results.csv", "truth.csv", "failures.csv", "diagnostics.csv", "summary.csv"}) {
        EXPECT_TRUE(fs::exists(dir / name)) << name;
    }
    const auto again = cli("summarize --in \"" + (dir / "results.csv").string() + "\" --out \"" +
                           (dir / "resummary.csv").string() + "\"");
    ASSERT_EQ(again.code, 0) << again.output;
    std::ifstream a(dir / "summary.csv");
    std::ifstream b(dir / "resummary.csv");
    std::ostringstream sa;
    std::ostringstream sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    EXPECT_EQ(sa.str(), sb.str());
    fs::remove_all(dir);
}
