#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "keyrelay/params.hpp"

namespace keyrelay {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive well-separated seeds for worker streams.
inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for sub-stream `stream` of `master`. Distinct (master, stream) pairs
/// give unrelated mt19937_64 states.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream)
{
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline Rng make_stream(std::uint64_t master, std::uint64_t stream)
{
    return Rng(derive_seed(master, stream));
}

// Uniform on [0, 1) from the top 53 bits; identical across standard libraries.
inline double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double exponential(Rng& rng, double mean)
{
    return -mean * std::log1p(-uniform01(rng));
}

/// Rayleigh-faded gains are exponential with mean equal to the link variance.
inline ChannelSample sample_slot(const SystemParams& params, Rng& rng)
{
    ChannelSample s;
    s.g_ab = exponential(rng, params.var_ab);
    s.g_ar = exponential(rng, params.var_ar);
    s.g_rb = exponential(rng, params.var_rb);
    return s;
}

/// Per-symbol transmit powers |x_B(t)|^2 of Bob's Gaussian key codeword,
/// t = 1..n_symbols, exponential with mean `p_b`.
inline std::vector<double> sample_rsi_block_gains(const SystemParams& params, double p_b, Rng& rng)
{
    std::vector<double> powers(static_cast<std::size_t>(params.n_symbols), 0.0);
    if (p_b <= 0.0)
        return powers;
    for (auto& p : powers)
        p = exponential(rng, p_b);
    return powers;
}

}  // namespace keyrelay
