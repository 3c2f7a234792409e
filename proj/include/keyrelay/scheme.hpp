#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "keyrelay/params.hpp"
#include "keyrelay/rates.hpp"

namespace keyrelay {

enum class Mode : int {
    dt_secure = 0,        // secrecy rate alone carries the packet, excess becomes key
    key_exchange,         // whole slot spent sharing key bits
    data_keyed_rt_fd,     // one-time padded data via relay, Bob sends key in phase 2
    data_keyed_rt_hd,     // one-time padded data via relay, Bob only receives
    data_keyed_dt,        // one-time padded data on the direct link
    silent,
};

inline constexpr std::size_t kModeCount = 6;

inline std::string_view to_string(Mode m)
{
    switch (m) {
    case Mode::dt_secure: return "DT_SECURE";
    case Mode::key_exchange: return "KEY_EXCHANGE";
    case Mode::data_keyed_rt_fd: return "DATA_KEYED_RT_FD";
    case Mode::data_keyed_rt_hd: return "DATA_KEYED_RT_HD";
    case Mode::data_keyed_dt: return "DATA_KEYED_DT";
    case Mode::silent: return "SILENT";
    }
    return "?";
}

inline bool consumes_key(Mode m)
{
    return m == Mode::data_keyed_rt_fd || m == Mode::data_keyed_rt_hd || m == Mode::data_keyed_dt;
}

/// Buffer level classes; the scheme's options depend on the level only through these.
enum class Regime : int { below_b = 0, mid = 1, full = 2 };

inline std::string_view to_string(Regime r)
{
    switch (r) {
    case Regime::below_b: return "BELOW_B";
    case Regime::mid: return "MID";
    case Regime::full: return "FULL";
    }
    return "?";
}

/// Mirrored key buffer content at Alice and Bob, in bits.
struct KeyQueueState {
    std::int64_t q_bits = 0;
};

struct SlotDecision {
    Mode mode = Mode::silent;
    std::int64_t key_delta_bits = 0;  // before clamping to [0, L_max]
    bool secure_packet = false;
};

inline Regime regime_of(std::int64_t q_bits, const SystemParams& p)
{
    if (q_bits < p.b_bits)
        return Regime::below_b;
    if (q_bits < p.l_max_bits)
        return Regime::mid;
    return Regime::full;
}

/// floor(fraction * WT * r): number of bits carried at rate r over part of a slot.
inline std::int64_t bits_of_rate(double r, double fraction, const SystemParams& p)
{
    if (!(r > 0.0))
        return 0;
    return static_cast<std::int64_t>(std::floor(fraction * static_cast<double>(p.wt) * r));
}

namespace detail {

inline SlotDecision key_exchange_or_silent(const RateTuple& r, const SystemParams& p)
{
    const double key_rate = std::max(r.r_sec_ab, r.r_sec_ba_max_power);
    if (key_rate <= 0.0)
        return {Mode::silent, 0, false};
    return {Mode::key_exchange, bits_of_rate(key_rate, 1.0, p), false};
}

// Keyed data options in priority order. False when every link is in connection outage.
inline bool try_keyed_data(const RateTuple& r, const SystemParams& p, SlotDecision& out)
{
    const double rd = p.r_d();
    if (r.r_rt_fd >= rd) {
        out = {Mode::data_keyed_rt_fd, -p.b_bits + bits_of_rate(r.r_sec_ba, 0.5, p), true};
        return true;
    }
    if (r.r_rt_hd >= rd) {
        out = {Mode::data_keyed_rt_hd, -p.b_bits, true};
        return true;
    }
    if (r.r_dt >= rd) {
        out = {Mode::data_keyed_dt, -p.b_bits, true};
        return true;
    }
    return false;
}

}  // namespace detail

/// Per-slot transmission policy.
///
/// 1. Secrecy rate meets R_d: send the packet directly, excess secrecy becomes key.
/// 2. Fewer than b key bits: exchange key at max(R_sec_AB, R_sec_BA).
/// 3. At least b bits, not full: padded data via FD relay, HD relay, or the
///    direct link, in that order; otherwise exchange key.
/// 4. Full buffer: as in 3 but stay silent instead of exchanging key.
inline SlotDecision decide_slot(const KeyQueueState& q, const RateTuple& r, const SystemParams& p)
{
    const double rd = p.r_d();
    if (r.r_sec_ab >= rd)
        return {Mode::dt_secure, bits_of_rate(r.r_sec_ab - rd, 1.0, p), true};

    SlotDecision d;
    switch (regime_of(q.q_bits, p)) {
    case Regime::below_b:
        return detail::key_exchange_or_silent(r, p);
    case Regime::mid:
        if (detail::try_keyed_data(r, p, d))
            return d;
        return detail::key_exchange_or_silent(r, p);
    case Regime::full:
        if (detail::try_keyed_data(r, p, d))
            return d;
        return {Mode::silent, 0, false};
    }
    throw std::logic_error("decide_slot: bad regime");
}

/// Applies the key delta and discards overflow beyond L_max. Throws
/// std::logic_error if a keyed transmission would draw from an empty buffer.
inline KeyQueueState apply_decision(const KeyQueueState& q, const SlotDecision& d, const SystemParams& p)
{
    if (consumes_key(d.mode) && q.q_bits < p.b_bits)
        throw std::logic_error("apply_decision: keyed transmission with " + std::to_string(q.q_bits) +
                               " key bits (need " + std::to_string(p.b_bits) + ")");
    const std::int64_t next = q.q_bits + d.key_delta_bits;
    return {std::clamp<std::int64_t>(next, 0, p.l_max_bits)};
}

struct TraceRow {
    std::int64_t slot = 0;
    Mode mode = Mode::silent;
    std::int64_t q_before = 0;
    std::int64_t delta = 0;
    std::int64_t q_after = 0;
    bool secure_packet = false;
};

inline void write_trace_header(std::ostream& os)
{
    os << "slot,mode,q_before,delta,q_after,secure_packet\n";
}

inline void write_trace_row(std::ostream& os, const TraceRow& row)
{
    os << row.slot << ',' << to_string(row.mode) << ',' << row.q_before << ',' << row.delta << ','
       << row.q_after << ',' << (row.secure_packet ? 1 : 0) << '\n';
}

}  // namespace keyrelay
