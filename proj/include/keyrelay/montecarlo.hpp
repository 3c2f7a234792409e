#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "keyrelay/channel.hpp"
#include "keyrelay/parallel.hpp"
#include "keyrelay/params.hpp"
#include "keyrelay/rates.hpp"
#include "keyrelay/scheme.hpp"

namespace keyrelay {

struct SimOptions {
    std::int64_t warmup_slots = 10000;  // discarded, the buffer starts empty
    int batches = 20;                   // batch means for the within-run confidence interval
    bool record_increments = false;     // per-regime key delta histograms
    std::ostream* trace = nullptr;      // optional CSV decision trace (measured slots only)
    bool common_random_numbers = false; // run_batch: trial t uses the same seed at every grid point
};

/// Measurements of one trajectory after warm-up.
struct SimResult {
    std::int64_t slots = 0;
    std::int64_t secure_packets = 0;
    double mu_empirical = 0.0;  // packets per slot
    double ci_halfwidth = 0.0;  // 95%, batch means
    std::vector<double> occupancy_histogram;  // index = key bits at slot start
    std::array<double, kModeCount> mode_frequencies{};
    std::array<std::array<std::int64_t, kModeCount>, 3> regime_mode_counts{};
    std::array<std::map<std::int64_t, std::int64_t>, 3> regime_increments;  // when recorded
};

/// Slot-by-slot simulation of the key buffer under decide_slot, starting empty.
inline SimResult run_trajectory(const SystemParams& params, RsiMode mode, std::int64_t n_slots, std::uint64_t seed,
                                const SimOptions& opt = {})
{
    params.validate();
    if (n_slots < 1)
        throw std::invalid_argument("run_trajectory: n_slots must be at least 1");

    Rng rng(seed);
    SimResult res;
    res.slots = n_slots;
    res.occupancy_histogram.assign(static_cast<std::size_t>(params.l_max_bits) + 1, 0.0);
    std::vector<std::int64_t> occupancy(res.occupancy_histogram.size(), 0);
    std::array<std::int64_t, kModeCount> mode_counts{};

    const int batches = static_cast<int>(std::clamp<std::int64_t>(opt.batches, 1, n_slots));
    std::vector<std::int64_t> batch_packets(static_cast<std::size_t>(batches), 0);
    std::vector<std::int64_t> batch_slots(static_cast<std::size_t>(batches), 0);

    if (opt.trace)
        write_trace_header(*opt.trace);

    KeyQueueState q{0};
    const std::int64_t total = opt.warmup_slots + n_slots;
    for (std::int64_t slot = 0; slot < total; ++slot) {
        const auto s = sample_slot(params, rng);
        const auto r = compute_rates(s, params, mode, &rng);
        const auto d = decide_slot(q, r, params);
        const auto next = apply_decision(q, d, params);

        if (slot >= opt.warmup_slots) {
            const std::int64_t k = slot - opt.warmup_slots;
            const auto regime = static_cast<std::size_t>(regime_of(q.q_bits, params));
            ++occupancy[static_cast<std::size_t>(q.q_bits)];
            ++mode_counts[static_cast<std::size_t>(d.mode)];
            ++res.regime_mode_counts[regime][static_cast<std::size_t>(d.mode)];
            if (opt.record_increments)
                ++res.regime_increments[regime][d.key_delta_bits];
            const auto b = static_cast<std::size_t>(k * batches / n_slots);
            ++batch_slots[b];
            if (d.secure_packet) {
                ++res.secure_packets;
                ++batch_packets[b];
            }
            if (opt.trace)
                write_trace_row(*opt.trace, {k, d.mode, q.q_bits, d.key_delta_bits, next.q_bits, d.secure_packet});
        }
        q = next;
    }

    const double n = static_cast<double>(n_slots);
    res.mu_empirical = static_cast<double>(res.secure_packets) / n;
    for (std::size_t i = 0; i < occupancy.size(); ++i)
        res.occupancy_histogram[i] = static_cast<double>(occupancy[i]) / n;
    for (std::size_t m = 0; m < kModeCount; ++m)
        res.mode_frequencies[m] = static_cast<double>(mode_counts[m]) / n;

    if (batches > 1) {
        double mean = 0.0;
        std::vector<double> mus(static_cast<std::size_t>(batches));
        for (std::size_t b = 0; b < mus.size(); ++b) {
            mus[b] = static_cast<double>(batch_packets[b]) / static_cast<double>(batch_slots[b]);
            mean += mus[b];
        }
        mean /= batches;
        double var = 0.0;
        for (double m : mus)
            var += (m - mean) * (m - mean);
        var /= (batches - 1);
        res.ci_halfwidth = 1.96 * std::sqrt(var / batches);
    }
    return res;
}

/// Aggregate of independent trials at one grid point.
struct BatchPoint {
    SystemParams params;
    std::vector<SimResult> trials;
    double mu_mean = 0.0;
    double std_error = 0.0;     // across trials; within-run batch means for a single trial
    double ci_halfwidth = 0.0;  // 95%

    [[nodiscard]] std::vector<double> mean_occupancy() const
    {
        std::vector<double> out(trials.front().occupancy_histogram.size(), 0.0);
        for (const auto& t : trials)
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] += t.occupancy_histogram[i] / static_cast<double>(trials.size());
        return out;
    }
};

/// Seed of trial `trial` at grid point `point`.
inline std::uint64_t trial_seed(std::uint64_t master, std::size_t point, std::size_t trial)
{
    return derive_seed(derive_seed(master, point), trial);
}

/// Independent trajectories for every grid point. Trials run on `threads`
/// workers; results are placed by index so the output does not depend on
/// scheduling. With opt.common_random_numbers the grid points share channel
/// sequences, so differences between points carry less noise.
inline std::vector<BatchPoint> run_batch(const std::vector<SystemParams>& grid, RsiMode mode, int trials,
                                         std::int64_t n_slots, std::uint64_t master_seed, const SimOptions& opt = {},
                                         int threads = 1)
{
    if (grid.empty())
        throw std::invalid_argument("run_batch: empty parameter grid");
    if (trials < 1)
        throw std::invalid_argument("run_batch: trials must be at least 1");

    std::vector<BatchPoint> out(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        out[g].params = grid[g];
        out[g].trials.resize(static_cast<std::size_t>(trials));
    }

    SimOptions local = opt;
    local.trace = nullptr;
    const auto per_point = static_cast<std::size_t>(trials);
    parallel_for(grid.size() * per_point, threads, [&](std::size_t j) {
        const std::size_t g = j / per_point;
        const std::size_t t = j % per_point;
        const std::uint64_t seed = trial_seed(master_seed, local.common_random_numbers ? 0 : g, t);
        out[g].trials[t] = run_trajectory(grid[g], mode, n_slots, seed, local);
    });

    for (auto& pt : out) {
        double mean = 0.0;
        for (const auto& t : pt.trials)
            mean += t.mu_empirical;
        mean /= trials;
        pt.mu_mean = mean;
        if (trials > 1) {
            double var = 0.0;
            for (const auto& t : pt.trials)
                var += (t.mu_empirical - mean) * (t.mu_empirical - mean);
            var /= (trials - 1);
            pt.std_error = std::sqrt(var / trials);
        } else {
            pt.std_error = pt.trials.front().ci_halfwidth / 1.96;
        }
        pt.ci_halfwidth = 1.96 * pt.std_error;
    }
    return out;
}

}  // namespace keyrelay
