#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace keyrelay {

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

/// Physical and protocol constants of the Alice / relay / Bob network.
///
/// Powers and noise are linear (mW); all internal math is done in linear
/// scale. Defaults are the reference operating point: P_A = 10 dBm,
/// P_B = P_R = 20 dBm, noise 0 dBm, unit link variances, RSI variance 0.2,
/// WT = 1000 symbols, b = 2000 bits.
struct SystemParams {
    double p_a = dbm_to_mw(10.0);
    double p_b_max = dbm_to_mw(20.0);
    double p_r = dbm_to_mw(20.0);
    double kappa = dbm_to_mw(0.0);  // same noise power at every node

    double var_ab = 1.0;
    double var_ar = 1.0;
    double var_rb = 1.0;
    double var_bb = 0.2;  // residual self-interference variance at Bob

    std::int64_t wt = 1000;          // symbols per slot (W*T)
    std::int64_t b_bits = 2000;      // data packet size
    std::int64_t l_max_bits = 14000; // key buffer capacity

    std::int64_t m_block = 1;        // RSI block length, 1 = fast, n_symbols = slow
    std::int64_t n_symbols = 10000;  // codeword length for the numeric rate evaluator

    // Cap full-duplex relaying rates at half the Alice-relay rate (DF decoding).
    bool cap_fd_by_relay_decoding = true;

    /// Target spectral efficiency b / (W T) in bits/s/Hz.
    [[nodiscard]] double r_d() const { return static_cast<double>(b_bits) / static_cast<double>(wt); }

    /// Throws std::invalid_argument naming the first offending field.
    void validate() const
    {
        auto require = [](bool ok, const char* field, const char* why) {
            if (!ok)
                throw std::invalid_argument(std::string("SystemParams.") + field + ": " + why);
        };
        require(p_a > 0.0, "p_a", "must be positive");
        require(p_b_max > 0.0, "p_b_max", "must be positive");
        require(p_r > 0.0, "p_r", "must be positive");
        require(kappa > 0.0, "kappa", "must be positive");
        require(var_ab > 0.0, "var_ab", "must be positive");
        require(var_ar > 0.0, "var_ar", "must be positive");
        require(var_rb > 0.0, "var_rb", "must be positive");
        require(var_bb >= 0.0, "var_bb", "must be non-negative");
        require(wt > 0, "wt", "must be positive");
        require(b_bits > 0, "b_bits", "must be positive");
        require(l_max_bits >= b_bits, "l_max_bits", "buffer must hold at least one packet (b bits)");
        require(n_symbols >= 1, "n_symbols", "must be at least 1");
        require(m_block >= 1 && m_block <= n_symbols, "m_block", "must lie in [1, n_symbols]");
    }
};

/// One slot's channel power gains |h|^2. Reciprocal links share a gain.
struct ChannelSample {
    double g_ab = 0.0;
    double g_ar = 0.0;
    double g_rb = 0.0;
};

}  // namespace keyrelay
