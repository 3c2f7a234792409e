#include <atomic>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include <gtest/gtest.h>

#include "keyrelay/montecarlo.hpp"
#include "keyrelay/parallel.hpp"

using namespace keyrelay;

TEST(Trajectory, SameSeedSameResult)
{
    SystemParams p;
    const auto a = run_trajectory(p, RsiMode::fast, 20000, 5);
    const auto b = run_trajectory(p, RsiMode::fast, 20000, 5);
    const auto c = run_trajectory(p, RsiMode::fast, 20000, 6);
    EXPECT_EQ(a.secure_packets, b.secure_packets);
    EXPECT_EQ(a.occupancy_histogram, b.occupancy_histogram);
    EXPECT_NE(a.occupancy_histogram, c.occupancy_histogram);
}

TEST(Trajectory, FrequenciesAreDistributions)
{
    SystemParams p;
    SimOptions opt;
    opt.record_increments = true;
    const auto r = run_trajectory(p, RsiMode::fast, 50000, 9, opt);
    EXPECT_LE(r.mu_empirical, 1.0);
    EXPECT_GE(r.mu_empirical, 0.0);
    EXPECT_NEAR(std::accumulate(r.occupancy_histogram.begin(), r.occupancy_histogram.end(), 0.0), 1.0, 1e-9);
    EXPECT_NEAR(std::accumulate(r.mode_frequencies.begin(), r.mode_frequencies.end(), 0.0), 1.0, 1e-12);
    std::int64_t from_regimes = 0;
    for (std::size_t g = 0; g < 3; ++g) {
        std::int64_t modes = 0, incs = 0;
        for (auto c : r.regime_mode_counts[g])
            modes += c;
        for (const auto& [d, c] : r.regime_increments[g])
            incs += c;
        EXPECT_EQ(modes, incs);
        from_regimes += modes;
    }
    EXPECT_EQ(from_regimes, 50000);
    EXPECT_EQ(r.regime_mode_counts[0][static_cast<std::size_t>(Mode::data_keyed_rt_fd)], 0);
    EXPECT_GT(r.ci_halfwidth, 0.0);
}

TEST(Trajectory, TraceHasOneRowPerMeasuredSlot)
{
    SystemParams p;
    std::ostringstream os;
    SimOptions opt;
    opt.warmup_slots = 100;
    opt.trace = &os;
    run_trajectory(p, RsiMode::fast, 250, 1, opt);
    const std::string text = os.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 251);
    EXPECT_EQ(text.rfind("slot,mode,q_before,delta,q_after,secure_packet\n", 0), 0u);
}

TEST(Trajectory, RejectsBadArguments)
{
    SystemParams p;
    EXPECT_THROW(run_trajectory(p, RsiMode::fast, 0, 1), std::invalid_argument);
    p.l_max_bits = 100;
    EXPECT_THROW(run_trajectory(p, RsiMode::fast, 10, 1), std::invalid_argument);
}

TEST(Batch, ResultsIndependentOfThreadCount)
{
    SystemParams a, b;
    b.l_max_bits = 4000;
    const auto one = run_batch({a, b}, RsiMode::fast, 3, 5000, 42, {}, 1);
    const auto many = run_batch({a, b}, RsiMode::fast, 3, 5000, 42, {}, 4);
    ASSERT_EQ(one.size(), 2u);
    for (std::size_t g = 0; g < 2; ++g) {
        EXPECT_EQ(one[g].mu_mean, many[g].mu_mean);
        EXPECT_EQ(one[g].std_error, many[g].std_error);
        for (std::size_t t = 0; t < 3; ++t)
            EXPECT_EQ(one[g].trials[t].secure_packets, many[g].trials[t].secure_packets);
    }
    EXPECT_NEAR(one[0].ci_halfwidth, 1.96 * one[0].std_error, 1e-15);
    EXPECT_THROW(run_batch({}, RsiMode::fast, 1, 10, 1), std::invalid_argument);
    EXPECT_THROW(run_batch({a}, RsiMode::fast, 0, 10, 1), std::invalid_argument);
}

TEST(Batch, TrialSeedsDiffer)
{
    EXPECT_NE(trial_seed(1, 0, 0), trial_seed(1, 0, 1));
    EXPECT_NE(trial_seed(1, 0, 1), trial_seed(1, 1, 0));
}

TEST(Parallel, VisitsEveryIndexOnceAndRethrows)
{
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits)
        EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(parallel_for(100, 3,
                              [](std::size_t i) {
                                  if (i == 57)
                                      throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
}

TEST(Batch, CommonRandomNumbersShareSeedsAcrossGrid)
{
    SystemParams p;
    SimOptions opt;
    opt.common_random_numbers = true;
    const auto pts = run_batch({p, p}, RsiMode::fast, 2, 3000, 8, opt);
    EXPECT_EQ(pts[0].trials[0].secure_packets, pts[1].trials[0].secure_packets);
    EXPECT_EQ(pts[0].mu_mean, pts[1].mu_mean);
    const auto indep = run_batch({p, p}, RsiMode::fast, 2, 3000, 8);
    EXPECT_NE(indep[0].trials[0].occupancy_histogram, indep[1].trials[0].occupancy_histogram);
}
