#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "keyrelay/channel.hpp"
#include "keyrelay/markov.hpp"
#include "oracles.hpp"

using namespace keyrelay;

namespace {

std::vector<std::vector<double>> random_chain(std::size_t n, Rng& rng)
{
    std::vector<std::vector<double>> t(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            // Sparse-ish rows with a guaranteed self loop and path to 0.
            if (j == i || j == 0 || uniform01(rng) < 0.3)
                t[i][j] = uniform01(rng) + 1e-3;
            sum += t[i][j];
        }
        for (auto& v : t[i])
            v /= sum;
    }
    return t;
}

IncrementDistribution pmf(Regime r, std::map<std::int64_t, double> m) { return {r, std::move(m)}; }

}  // namespace

TEST(SteadyState, ThreeStateBirthDeath)
{
    auto m = MarkovModel::from_dense({{0.5, 0.5, 0.0}, {0.25, 0.5, 0.25}, {0.0, 0.5, 0.5}});
    const auto pi = steady_state(m);
    EXPECT_NEAR(pi[0], 0.25, 1e-10);
    EXPECT_NEAR(pi[1], 0.5, 1e-10);
    EXPECT_NEAR(pi[2], 0.25, 1e-10);
    EXPECT_EQ(m.steady_state, pi);
}

TEST(SteadyState, MatchesDenseSolveOnRandomChains)
{
    Rng rng(7);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(uniform01(rng) * 31);
        const auto t = random_chain(n, rng);
        auto m = MarkovModel::from_dense(t);
        const auto pi = steady_state(m);
        const auto ref = oracle::stationary_dense(t);
        for (std::size_t i = 0; i < n; ++i)
            EXPECT_NEAR(pi[i], ref[i], 1e-9) << "n=" << n << " i=" << i;
        EXPECT_LE(stationarity_residual(m, pi), 1e-10);
    }
}

TEST(SteadyState, ReducibleChainNamesStuckStates)
{
    auto m = MarkovModel::from_dense({{1.0, 0.0, 0.0}, {0.0, 0.5, 0.5}, {0.0, 0.5, 0.5}});
    try {
        steady_state(m);
        FAIL() << "expected ReducibleChainError";
    } catch (const ReducibleChainError& e) {
        EXPECT_EQ(e.states(), (std::vector<std::size_t>{1, 2}));
    }
}

TEST(SteadyState, PeriodicChainDoesNotConverge)
{
    auto m = MarkovModel::from_dense({{0.0, 1.0}, {1.0, 0.0}});
    SteadyStateOptions opt;
    opt.max_iterations = 5000;
    EXPECT_THROW(steady_state(m, opt), NonConvergenceError);
}

TEST(SteadyState, RejectsNonStochasticRows)
{
    auto m = MarkovModel::from_dense({{0.5, 0.4}, {0.5, 0.5}});
    EXPECT_THROW(steady_state(m), ChainError);
}

TEST(BuildChain, RowsStochasticAndMeanPreserving)
{
    SystemParams p;
    p.b_bits = 100;
    p.l_max_bits = 400;
    const std::array<IncrementDistribution, 3> incs{
        pmf(Regime::below_b, {{0, 0.2}, {37, 0.5}, {130, 0.3}}),
        pmf(Regime::mid, {{-100, 0.6}, {-63, 0.1}, {45, 0.3}}),
        pmf(Regime::full, {{-100, 0.7}, {0, 0.3}}),
    };
    for (std::int64_t width : {1, 20, 50, 100}) {
        const auto m = build_chain(incs, p, width);
        ASSERT_EQ(m.state_count, static_cast<std::size_t>(400 / width + 1));
        for (std::size_t i = 0; i < m.state_count; ++i) {
            EXPECT_NEAR(m.transitions.row_sum(i), 1.0, 1e-14);
            const std::int64_t q = m.state_bits(i);
            double expected = 0.0;
            for (const auto& [d, pr] : incs[static_cast<std::size_t>(regime_of(q, p))].pmf)
                expected += pr * static_cast<double>(std::clamp<std::int64_t>(q + d, 0, p.l_max_bits));
            double mean = 0.0;
            for (std::size_t k = m.transitions.row_ptr[i]; k < m.transitions.row_ptr[i + 1]; ++k)
                mean += m.transitions.val[k] * static_cast<double>(m.state_bits(m.transitions.col[k]));
            EXPECT_NEAR(mean, expected, 1e-9) << "width=" << width << " row=" << i;
        }
    }
    EXPECT_THROW(build_chain(incs, p, 30), std::invalid_argument);
    auto empty = incs;
    empty[1].pmf.clear();
    EXPECT_THROW(build_chain(empty, p, 50), std::invalid_argument);
}

TEST(BuildChain, BitExactChainMatchesDenseSolve)
{
    SystemParams p;
    p.b_bits = 4;
    p.l_max_bits = 12;
    const std::array<IncrementDistribution, 3> incs{
        pmf(Regime::below_b, {{0, 0.3}, {3, 0.7}}),
        pmf(Regime::mid, {{-4, 0.5}, {1, 0.2}, {2, 0.3}}),
        pmf(Regime::full, {{-4, 0.8}, {0, 0.2}}),
    };
    auto m = build_chain(incs, p, 1);
    std::vector<std::vector<double>> dense(13, std::vector<double>(13, 0.0));
    for (std::int64_t q = 0; q <= 12; ++q)
        for (const auto& [d, pr] : incs[static_cast<std::size_t>(regime_of(q, p))].pmf)
            dense[static_cast<std::size_t>(q)][static_cast<std::size_t>(std::clamp<std::int64_t>(q + d, 0, 12))] += pr;
    const auto pi = steady_state(m);
    const auto ref = oracle::stationary_dense(dense);
    for (std::size_t i = 0; i < ref.size(); ++i)
        EXPECT_NEAR(pi[i], ref[i], 1e-10);
}

TEST(Increments, EstimatedPmfsAreDistributions)
{
    SystemParams p;
    Rng rng(12);
    const auto est = estimate_increments(p, RsiMode::fast, 20000, rng);
    for (const auto& inc : est.regimes)
        EXPECT_NEAR(inc.total(), 1.0, 1e-12);
    for (const auto& [d, pr] : est.regimes[0].pmf)
        EXPECT_GE(d, 0);
    const auto& e = est.events;
    EXPECT_LE(e.p_secure_direct + e.p_relay + e.p_direct, 1.0 + 1e-12);
    Rng again(12);
    EXPECT_THROW(estimate_increments(p, RsiMode::fast, 9999, again), std::invalid_argument);
}

TEST(Increments, DeliveryEventClassification)
{
    SystemParams p;
    RateTuple r;
    EXPECT_EQ(delivery_event(r, p), 0);
    r.r_dt = 2.0;
    EXPECT_EQ(delivery_event(r, p), 3);
    r.r_rt_hd = 2.0;
    EXPECT_EQ(delivery_event(r, p), 2);
    r.r_sec_ab = 2.0;
    EXPECT_EQ(delivery_event(r, p), 1);
}

TEST(Throughput, AnalyticFormula)
{
    SystemParams p;
    p.b_bits = 1;
    p.l_max_bits = 2;
    auto m = MarkovModel::from_dense({{0.5, 0.5, 0.0}, {0.25, 0.5, 0.25}, {0.0, 0.5, 0.5}});
    steady_state(m);
    const auto rep = secure_throughput_analytic(m, p, {0.2, 0.5, 0.1});
    EXPECT_NEAR(rep.pr_q_ge_b, 0.75, 1e-10);
    EXPECT_NEAR(rep.mu_sec_analytic, 0.2 + 0.75 * 0.6, 1e-10);
    MarkovModel bare = MarkovModel::from_dense({{1.0}});
    EXPECT_THROW(secure_throughput_analytic(bare, p, {}), std::invalid_argument);
}

TEST(Occupancy, BinningPreservesMassAndMean)
{
    std::vector<double> per_bit(101, 0.0);
    per_bit[0] = 0.1;
    per_bit[13] = 0.4;
    per_bit[77] = 0.2;
    per_bit[100] = 0.3;
    const auto binned = bin_occupancy(per_bit, 20);
    ASSERT_EQ(binned.size(), 6u);
    double mass = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < binned.size(); ++i) {
        mass += binned[i];
        mean += binned[i] * 20.0 * static_cast<double>(i);
    }
    EXPECT_NEAR(mass, 1.0, 1e-15);
    EXPECT_NEAR(mean, 0.4 * 13 + 0.2 * 77 + 0.3 * 100, 1e-12);
    EXPECT_THROW(bin_occupancy(per_bit, 30), std::invalid_argument);
    EXPECT_NEAR(total_variation(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}), 0.5, 1e-15);
}
