#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "keyrelay/channel.hpp"
#include "keyrelay/params.hpp"
#include "keyrelay/special_functions.hpp"

namespace keyrelay {

/// How Bob's residual self-interference channel varies within a codeword.
enum class RsiMode {
    fast,     // changes every symbol (M = 1), closed form
    slow,     // constant over the codeword (M = n), closed-form limit
    numeric,  // block-determinant evaluator over sampled key symbols
};

inline std::string_view to_string(RsiMode mode)
{
    switch (mode) {
    case RsiMode::fast: return "fast";
    case RsiMode::slow: return "slow";
    case RsiMode::numeric: return "numeric";
    }
    return "?";
}

inline RsiMode parse_rsi_mode(std::string_view name)
{
    if (name == "fast") return RsiMode::fast;
    if (name == "slow") return RsiMode::slow;
    if (name == "numeric") return RsiMode::numeric;
    throw std::invalid_argument("unknown rsi_mode '" + std::string(name) + "' (expected fast, slow or numeric)");
}

/// All achievable and secrecy rates of one slot, in bits/s/Hz.
struct RateTuple {
    double r_dt = 0.0;       // Alice -> Bob, whole slot
    double r_ar = 0.0;       // Alice -> relay
    double r_sec_ab = 0.0;   // [r_dt - r_ar]^+
    double r_sec_ba = 0.0;   // Bob -> Alice secrecy rate at p_b_selected
    double r_sec_ba_max_power = 0.0;  // same at p_b_max, used for whole-slot key exchange
    double r_rt_hd = 0.0;    // half-duplex relaying
    double r_rt_fd = 0.0;    // full-duplex relaying at p_b_selected, 0 when infeasible
    double p_b_selected = 0.0;
};

inline double log2_1p(double x) { return std::log1p(x) / std::numbers::ln2; }

inline double rate_dt(const ChannelSample& s, const SystemParams& p)
{
    return log2_1p(p.p_a / p.kappa * s.g_ab);
}

inline double rate_ar(const ChannelSample& s, const SystemParams& p)
{
    return log2_1p(p.p_a / p.kappa * s.g_ar);
}

inline double secrecy_dt(const ChannelSample& s, const SystemParams& p)
{
    return std::max(0.0, rate_dt(s, p) - rate_ar(s, p));
}

/// Bob -> Alice secrecy rate with the relay as eavesdropper (reciprocal gains).
inline double secrecy_ba(const ChannelSample& s, const SystemParams& p, double p_b)
{
    if (p_b <= 0.0)
        return 0.0;
    const double snr = p_b / p.kappa;
    return std::max(0.0, log2_1p(snr * s.g_ab) - log2_1p(snr * s.g_rb));
}

/// Interference-free MRC rate of the direct phase plus the relayed phase.
inline double mrc_rate(const ChannelSample& s, const SystemParams& p)
{
    return log2_1p(s.g_ab * p.p_a / p.kappa + s.g_rb * p.p_r / p.kappa);
}

inline double rate_rt_hd(const ChannelSample& s, const SystemParams& p)
{
    return 0.5 * std::min(rate_ar(s, p), mrc_rate(s, p));
}

/// Weights of the two log-det terms of the key-aware full-duplex rate.
/// gamma1 <= gamma2 always; both carry units of 1/power.
struct RsiWeights {
    double gamma1 = 0.0;
    double gamma2 = 0.0;
};

inline RsiWeights rsi_weights(const ChannelSample& s, const SystemParams& p)
{
    const double snr_a = s.g_ab * p.p_a / p.kappa;
    const double snr_r = s.g_rb * p.p_r / p.kappa;
    return {(1.0 + snr_a) / ((1.0 + snr_a + snr_r) * p.kappa), 1.0 / p.kappa};
}

namespace detail {

inline double finish_fd_rate(const ChannelSample& s, const SystemParams& p, double rate)
{
    if (p.cap_fd_by_relay_decoding)
        rate = std::min(rate, 0.5 * rate_ar(s, p));
    return std::max(0.0, rate);
}

}  // namespace detail

/// Key-aware full-duplex relaying rate evaluated directly from Bob's
/// per-symbol transmit powers.
///
/// The log-det terms factor over RSI blocks of length m_block: each block
/// contributes log2(1 + gamma_q * var_bb * sum of |x_B(t)|^2 over the block).
/// A trailing partial block is used when m_block does not divide the length.
inline double rate_rt_fd_numeric(const ChannelSample& s, const SystemParams& p,
                                 std::span<const double> tx_powers)
{
    const auto w = rsi_weights(s, p);
    const std::size_t n = tx_powers.size();
    const std::size_t block = static_cast<std::size_t>(p.m_block);
    double diff = 0.0;  // X1 - X2 in nats
    if (p.var_bb > 0.0 && n > 0) {
        for (std::size_t start = 0; start < n; start += block) {
            const std::size_t stop = std::min(n, start + block);
            double energy = 0.0;
            for (std::size_t t = start; t < stop; ++t)
                energy += tx_powers[t];
            const double scaled = p.var_bb * energy;
            diff += std::log1p(w.gamma1 * scaled) - std::log1p(w.gamma2 * scaled);
        }
    }
    const double correction = n > 0 ? diff / (2.0 * static_cast<double>(n) * std::numbers::ln2) : 0.0;
    return detail::finish_fd_rate(s, p, 0.5 * mrc_rate(s, p) + correction);
}

inline double rate_rt_fd_numeric(const ChannelSample& s, const SystemParams& p, double p_b, Rng& rng)
{
    const auto powers = sample_rsi_block_gains(p, p_b, rng);
    return rate_rt_fd_numeric(s, p, powers);
}

/// Fast-RSI (M = 1) closed form. Each log-det term averages to
/// e^a E1(a) / ln 2 with a = 1 / (gamma_q var_bb p_b).
inline double rate_rt_fd_fast(const ChannelSample& s, const SystemParams& p, double p_b)
{
    double correction = 0.0;
    if (p_b > 0.0 && p.var_bb > 0.0) {
        const auto w = rsi_weights(s, p);
        const double a1 = 1.0 / (w.gamma1 * p.var_bb * p_b);
        const double a2 = 1.0 / (w.gamma2 * p.var_bb * p_b);
        correction = (scaled_exp_integral(a1) - scaled_exp_integral(a2)) / (2.0 * std::numbers::ln2);
    }
    return detail::finish_fd_rate(s, p, 0.5 * mrc_rate(s, p) + correction);
}

/// Slow-RSI limit: the self-interference vanishes, leaving the MRC rate.
inline double rate_rt_fd_slow(const ChannelSample& s, const SystemParams& p, double /*p_b*/ = 0.0)
{
    return detail::finish_fd_rate(s, p, 0.5 * mrc_rate(s, p));
}

/// Benchmark full-duplex rate that treats the RSI as noise (g_bb is one
/// RSI power gain draw).
inline double rate_rt_fd_conventional(const ChannelSample& s, const SystemParams& p, double p_b, double g_bb)
{
    const double snr_a = s.g_ab * p.p_a / p.kappa;
    const double snr_r = s.g_rb * p.p_r / p.kappa;
    const double sinr_r = snr_r / (1.0 + g_bb * p_b / p.kappa);
    return 0.5 * std::min(rate_ar(s, p), log2_1p(sinr_r + snr_a));
}

struct PowerSearchOptions {
    double relative_tolerance = 1e-9;  // bisection stops at this width relative to p_b_max
    bool verify_monotone = true;
    int guard_points = 32;
    int fallback_points = 4096;
};

struct PowerSelection {
    double p_b = 0.0;
    double rate = 0.0;
    bool feasible = false;        // rate >= R_d at p_b
    bool used_grid_fallback = false;
};

namespace detail {

template <class RateFn>
PowerSelection search_max_feasible_power(const SystemParams& p, RateFn&& rate_at, const PowerSearchOptions& opt)
{
    const double target = p.r_d();
    const double p_max = p.p_b_max;

    const double r_zero = rate_at(0.0);
    if (r_zero < target)
        return {0.0, r_zero, false, false};
    const double r_max = rate_at(p_max);
    if (r_max >= target)
        return {p_max, r_max, true, false};

    double lo = 0.0;
    double hi = p_max;
    bool fallback = false;

    if (opt.verify_monotone) {
        const int k = std::max(opt.guard_points, 2);
        double prev = r_zero;
        for (int i = 1; i < k - 1 && !fallback; ++i) {
            const double r = rate_at(p_max * i / (k - 1));
            if (r > prev + 1e-12)
                fallback = true;
            prev = r;
        }
    }

    if (fallback) {
        // Largest grid point that still meets the target, then refine to the next one.
        const int k = std::max(opt.fallback_points, 2);
        int best = 0;
        for (int i = k - 1; i >= 0; --i) {
            if (rate_at(p_max * i / (k - 1)) >= target) {
                best = i;
                break;
            }
        }
        lo = p_max * best / (k - 1);
        hi = p_max * (best + 1) / (k - 1);
    }

    while (hi - lo > opt.relative_tolerance * p_max) {
        const double mid = 0.5 * (lo + hi);
        if (rate_at(mid) >= target)
            lo = mid;
        else
            hi = mid;
    }
    return {lo, rate_at(lo), true, fallback};
}

}  // namespace detail

/// Largest Bob transmit power in [0, p_b_max] keeping the full-duplex
/// relaying rate at or above R_d.
///
/// When even p_b = 0 misses the target the result is infeasible and the
/// caller falls back to half-duplex relaying. Numeric mode draws one unit-power
/// key codeword from `rng` and rescales it for every candidate power so the
/// search sees a deterministic function of p_b.
inline PowerSelection select_bob_power(const ChannelSample& s, const SystemParams& p, RsiMode mode,
                                       Rng* rng = nullptr, const PowerSearchOptions& opt = {})
{
    switch (mode) {
    case RsiMode::slow: {
        const double r = rate_rt_fd_slow(s, p);
        const bool ok = r >= p.r_d();
        return {ok ? p.p_b_max : 0.0, r, ok, false};
    }
    case RsiMode::fast:
        return detail::search_max_feasible_power(
            p, [&](double pb) { return rate_rt_fd_fast(s, p, pb); }, opt);
    case RsiMode::numeric: {
        if (rng == nullptr)
            throw std::invalid_argument("select_bob_power: numeric mode needs a random stream");
        const auto unit = sample_rsi_block_gains(p, 1.0, *rng);
        std::vector<double> scaled(unit.size());
        return detail::search_max_feasible_power(
            p,
            [&](double pb) {
                std::transform(unit.begin(), unit.end(), scaled.begin(), [pb](double u) { return u * pb; });
                return rate_rt_fd_numeric(s, p, scaled);
            },
            opt);
    }
    }
    throw std::logic_error("select_bob_power: bad mode");
}

/// Every rate the scheme needs for one slot, including Bob's power choice.
inline RateTuple compute_rates(const ChannelSample& s, const SystemParams& p, RsiMode mode, Rng* rng = nullptr)
{
    RateTuple r;
    r.r_dt = rate_dt(s, p);
    r.r_ar = rate_ar(s, p);
    r.r_sec_ab = std::max(0.0, r.r_dt - r.r_ar);
    r.r_rt_hd = 0.5 * std::min(r.r_ar, mrc_rate(s, p));

    const auto sel = select_bob_power(s, p, mode, rng);
    if (sel.feasible) {
        r.r_rt_fd = sel.rate;
        r.p_b_selected = sel.p_b;
    }
    r.r_sec_ba = secrecy_ba(s, p, r.p_b_selected);
    r.r_sec_ba_max_power = secrecy_ba(s, p, p.p_b_max);
    return r;
}

}  // namespace keyrelay
