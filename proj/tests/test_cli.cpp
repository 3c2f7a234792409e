#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(KEYRELAY_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("keyrelay_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST(Cli, UnknownExperimentIsConfigError)
{
    EXPECT_EQ(run_cli("--experiment fig9 --out " + scratch("bad").string()), 2);
}

TEST(Cli, BadConfigFileIsConfigError)
{
    const auto dir = scratch("badcfg");
    std::ofstream(dir / "cfg.json") << R"({"l_max_packets": 1})";
    EXPECT_EQ(run_cli("--config " + (dir / "cfg.json").string() + " --out " + dir.string()), 2);
    EXPECT_EQ(run_cli("--no-such-flag"), 2);
}

TEST(Cli, RateSweepIsByteIdenticalAcrossRuns)
{
    const auto dir = scratch("fig1");
    std::ofstream(dir / "cfg.json") << R"({"experiment": "fig1_rates", "samples": 2000,
        "fig1_numeric_symbols": 200, "sweep": {"axis": "var_bb", "values": [0.05, 0.5]}})";
    const std::string cfg = "--config " + (dir / "cfg.json").string();
    ASSERT_EQ(run_cli(cfg + " --seed 3 --out " + (dir / "a").string()), 0);
    ASSERT_EQ(run_cli(cfg + " --seed 3 --threads 2 --out " + (dir / "b").string()), 0);
    const auto a = slurp(dir / "a" / "fig1_rates.csv");
    EXPECT_EQ(a.rfind("sweep_value,rate_slow_closed,rate_fast_closed,rate_fast_numeric_mc,rate_conventional\n", 0),
              0u);
    EXPECT_EQ(a, slurp(dir / "b" / "fig1_rates.csv"));
    EXPECT_TRUE(fs::exists(dir / "a" / "fig1_rates.gp"));
}

TEST(Cli, ThroughputSweepWritesSchema)
{
    const auto dir = scratch("fig2");
    std::ofstream(dir / "cfg.json") << R"({"experiment": "fig2_throughput", "p_a_dbm": 20,
        "l_max_packets_values": [2, 4], "trials": 2, "n_slots": 20000, "warmup_slots": 1000,
        "increment_samples": 20000})";
    const int rc = run_cli("--config " + (dir / "cfg.json").string() + " --out " + dir.string());
    EXPECT_TRUE(rc == 0 || rc == 1);
    const auto csv = slurp(dir / "fig2_throughput.csv");
    EXPECT_EQ(csv.rfind("r_d,l_max_packets,mu_analytic,mu_montecarlo,ci,pr_q_ge_b\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    EXPECT_TRUE(fs::exists(dir / "fig2_throughput.gp"));
}
