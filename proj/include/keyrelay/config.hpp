#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "keyrelay/params.hpp"
#include "keyrelay/rates.hpp"

namespace keyrelay {

/// Configuration problem; `field()` names the offending key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& why)
        : std::runtime_error("config field '" + field + "': " + why), field_(std::move(field))
    {
    }
    [[nodiscard]] const std::string& field() const { return field_; }

private:
    std::string field_;
};

enum class Experiment { fig1_rates, fig2_throughput, validate_closed_forms, validate_chain };

inline constexpr std::string_view kExperimentNames[] = {"fig1_rates", "fig2_throughput", "validate_closed_forms",
                                                        "validate_chain"};

inline std::string_view to_string(Experiment e) { return kExperimentNames[static_cast<int>(e)]; }

inline std::string experiment_name_list()
{
    std::string s;
    for (auto n : kExperimentNames)
        s += (s.empty() ? "" : ", ") + std::string(n);
    return s;
}

inline Experiment parse_experiment(std::string_view name)
{
    for (int i = 0; i < 4; ++i)
        if (kExperimentNames[i] == name)
            return static_cast<Experiment>(i);
    throw ConfigError("experiment", "unknown experiment '" + std::string(name) + "'; valid names: " +
                                        experiment_name_list());
}

/// Sweep axes understood by fig1_rates.
inline constexpr std::string_view kSweepAxes[] = {"var_bb", "p_r_dbm", "p_b_dbm", "p_a_dbm"};

/// Experiment description in human units (dBm, packets). Defaults reproduce
/// the reference operating point.
struct ExperimentConfig {
    Experiment experiment = Experiment::fig1_rates;

    double p_a_dbm = 10.0;
    double p_b_dbm = 20.0;
    double p_r_dbm = 20.0;
    double kappa_dbm = 0.0;
    double var_ab = 1.0;
    double var_ar = 1.0;
    double var_rb = 1.0;
    double var_bb = 0.2;
    std::int64_t wt = 1000;
    std::int64_t b_bits = 2000;
    std::int64_t l_max_packets = 7;
    RsiMode rsi_mode = RsiMode::fast;
    std::int64_t m_block = 1;
    std::int64_t n_symbols = 10000;
    bool cap_fd_by_relay_decoding = true;

    // fig1_rates
    std::string sweep_axis = "var_bb";
    std::vector<double> sweep_values{0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
    std::int64_t samples = 100000;
    std::int64_t fig1_numeric_symbols = 1000;

    // fig2_throughput / validate_chain
    std::vector<double> r_d_values{2.0};
    std::vector<std::int64_t> l_max_packets_values{2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::int64_t increment_samples = 200000;
    std::int64_t bin_width_bits = 50;

    int trials = 8;
    std::int64_t n_slots = 1000000;
    std::int64_t warmup_slots = 10000;
    std::uint64_t seed = 1;
    std::string output = "results";
    int threads = 1;

    /// Linear-scale parameters for the current packet size and buffer.
    [[nodiscard]] SystemParams system_params() const
    {
        SystemParams p;
        p.p_a = dbm_to_mw(p_a_dbm);
        p.p_b_max = dbm_to_mw(p_b_dbm);
        p.p_r = dbm_to_mw(p_r_dbm);
        p.kappa = dbm_to_mw(kappa_dbm);
        p.var_ab = var_ab;
        p.var_ar = var_ar;
        p.var_rb = var_rb;
        p.var_bb = var_bb;
        p.wt = wt;
        p.b_bits = b_bits;
        p.l_max_bits = l_max_packets * b_bits;
        p.m_block = m_block;
        p.n_symbols = n_symbols;
        p.cap_fd_by_relay_decoding = cap_fd_by_relay_decoding;
        return p;
    }

    /// Packet size carrying R_d bits/s/Hz over one slot.
    [[nodiscard]] std::int64_t packet_bits_for(double r_d) const
    {
        const double bits = r_d * static_cast<double>(wt);
        const double rounded = std::round(bits);
        if (!(r_d > 0.0) || std::fabs(bits - rounded) > 1e-9 * std::max(1.0, bits))
            throw ConfigError("r_d_values", "R_d * WT must be a positive whole number of bits");
        return static_cast<std::int64_t>(rounded);
    }

    /// Throws ConfigError for the first invalid field.
    void validate() const
    {
        auto require = [](bool ok, const char* field, const std::string& why) {
            if (!ok)
                throw ConfigError(field, why);
        };
        require(wt > 0, "wt", "must be positive");
        require(b_bits > 0, "b_bits", "must be positive");
        require(l_max_packets >= 2, "l_max_packets",
                "the key buffer must hold at least 2 packets (L_max >= 2b) for keyed relaying to work");
        require(var_ab > 0 && std::isfinite(var_ab), "var_ab", "must be positive");
        require(var_ar > 0 && std::isfinite(var_ar), "var_ar", "must be positive");
        require(var_rb > 0 && std::isfinite(var_rb), "var_rb", "must be positive");
        require(var_bb >= 0 && std::isfinite(var_bb), "var_bb", "must be non-negative");
        require(n_symbols >= 1, "n_symbols", "must be at least 1");
        require(m_block >= 1 && m_block <= n_symbols, "m_block", "must lie in [1, n_symbols]");
        require(std::find(std::begin(kSweepAxes), std::end(kSweepAxes), sweep_axis) != std::end(kSweepAxes),
                "sweep.axis", "unknown axis '" + sweep_axis + "' (var_bb, p_r_dbm, p_b_dbm, p_a_dbm)");
        require(!sweep_values.empty(), "sweep.values", "must not be empty");
        require(std::all_of(sweep_values.begin(), sweep_values.end(), [](double v) { return std::isfinite(v); }),
                "sweep.values", "must be finite");
        require(std::is_sorted(sweep_values.begin(), sweep_values.end()), "sweep.values", "must be sorted");
        if (sweep_axis == "var_bb")
            require(sweep_values.front() >= 0.0, "sweep.values", "RSI variance must be non-negative");
        require(!r_d_values.empty(), "r_d_values", "must not be empty");
        require(std::is_sorted(r_d_values.begin(), r_d_values.end()), "r_d_values", "must be sorted");
        for (double rd : r_d_values)
            (void)packet_bits_for(rd);
        require(!l_max_packets_values.empty(), "l_max_packets_values", "must not be empty");
        require(std::is_sorted(l_max_packets_values.begin(), l_max_packets_values.end()), "l_max_packets_values",
                "must be sorted");
        require(l_max_packets_values.front() >= 2, "l_max_packets_values",
                "the key buffer must hold at least 2 packets (L_max >= 2b)");
        require(samples >= 1, "samples", "must be positive");
        require(fig1_numeric_symbols >= 1, "fig1_numeric_symbols", "must be positive");
        require(increment_samples >= 10000, "increment_samples", "must be at least 10000");
        require(bin_width_bits >= 1, "bin_width_bits", "must be positive");
        require(trials >= 1, "trials", "must be positive");
        require(n_slots >= 1, "n_slots", "must be positive");
        require(warmup_slots >= 0, "warmup_slots", "must be non-negative");
        require(threads >= 1, "threads", "must be positive");
    }
};

namespace detail {

template <class T>
T read_field(const nlohmann::json& j, const char* key, const T& fallback)
{
    if (!j.contains(key))
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(key, std::string("wrong type: ") + e.what());
    }
}

}  // namespace detail

/// Parses a JSON document; missing keys keep their defaults, unknown keys are rejected.
inline ExperimentConfig parse_config(const nlohmann::json& j)
{
    static const std::set<std::string> known{
        "experiment", "p_a_dbm", "p_b_dbm", "p_r_dbm", "kappa_dbm", "var_ab", "var_ar", "var_rb", "var_bb", "wt",
        "b_bits", "r_d", "l_max_packets", "l_max_bits", "rsi_mode", "m_block", "n_symbols",
        "cap_fd_by_relay_decoding", "sweep", "samples", "fig1_numeric_symbols", "r_d_values",
        "l_max_packets_values", "increment_samples", "bin_width_bits", "trials", "n_slots", "warmup_slots", "seed",
        "output", "threads"};
    if (!j.is_object())
        throw ConfigError("<root>", "config must be a JSON object");
    for (const auto& [key, value] : j.items())
        if (!known.contains(key))
            throw ConfigError(key, "unknown field");

    using detail::read_field;
    ExperimentConfig c;
    if (j.contains("experiment"))
        c.experiment = parse_experiment(read_field<std::string>(j, "experiment", ""));
    c.p_a_dbm = read_field(j, "p_a_dbm", c.p_a_dbm);
    c.p_b_dbm = read_field(j, "p_b_dbm", c.p_b_dbm);
    c.p_r_dbm = read_field(j, "p_r_dbm", c.p_r_dbm);
    c.kappa_dbm = read_field(j, "kappa_dbm", c.kappa_dbm);
    c.var_ab = read_field(j, "var_ab", c.var_ab);
    c.var_ar = read_field(j, "var_ar", c.var_ar);
    c.var_rb = read_field(j, "var_rb", c.var_rb);
    c.var_bb = read_field(j, "var_bb", c.var_bb);
    c.wt = read_field(j, "wt", c.wt);

    if (j.contains("r_d")) {
        const double rd = read_field(j, "r_d", 0.0);
        const auto bits = c.packet_bits_for(rd);
        if (j.contains("b_bits") && read_field<std::int64_t>(j, "b_bits", 0) != bits)
            throw ConfigError("r_d", "inconsistent with b_bits / wt");
        c.b_bits = bits;
        if (!j.contains("r_d_values"))
            c.r_d_values = {rd};
    } else {
        c.b_bits = read_field(j, "b_bits", c.b_bits);
        if (!j.contains("r_d_values"))
            c.r_d_values = {static_cast<double>(c.b_bits) / static_cast<double>(c.wt)};
    }

    if (j.contains("l_max_bits")) {
        if (j.contains("l_max_packets"))
            throw ConfigError("l_max_bits", "give either l_max_bits or l_max_packets, not both");
        const auto bits = read_field<std::int64_t>(j, "l_max_bits", 0);
        if (bits < 2 * c.b_bits)
            throw ConfigError("l_max_bits", "the key buffer must hold at least 2 packets (L_max >= 2b = " +
                                                std::to_string(2 * c.b_bits) + " bits)");
        if (bits % c.b_bits != 0)
            throw ConfigError("l_max_bits", "must be a whole number of packets");
        c.l_max_packets = bits / c.b_bits;
    } else {
        c.l_max_packets = read_field(j, "l_max_packets", c.l_max_packets);
    }

    if (j.contains("rsi_mode")) {
        try {
            c.rsi_mode = parse_rsi_mode(read_field<std::string>(j, "rsi_mode", ""));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("rsi_mode", e.what());
        }
    }
    c.n_symbols = read_field(j, "n_symbols", c.n_symbols);
    c.m_block = read_field(j, "m_block", c.m_block);
    c.cap_fd_by_relay_decoding = read_field(j, "cap_fd_by_relay_decoding", c.cap_fd_by_relay_decoding);

    if (j.contains("sweep")) {
        const auto& sw = j.at("sweep");
        if (!sw.is_object())
            throw ConfigError("sweep", "must be an object with 'axis' and 'values'");
        for (const auto& [key, value] : sw.items())
            if (key != "axis" && key != "values")
                throw ConfigError("sweep." + key, "unknown field");
        c.sweep_axis = read_field(sw, "axis", c.sweep_axis);
        c.sweep_values = read_field(sw, "values", c.sweep_values);
    }
    c.samples = read_field(j, "samples", c.samples);
    c.fig1_numeric_symbols = read_field(j, "fig1_numeric_symbols", c.fig1_numeric_symbols);
    c.r_d_values = read_field(j, "r_d_values", c.r_d_values);
    c.l_max_packets_values = read_field(j, "l_max_packets_values", c.l_max_packets_values);
    c.increment_samples = read_field(j, "increment_samples", c.increment_samples);
    c.bin_width_bits = read_field(j, "bin_width_bits", c.bin_width_bits);
    c.trials = read_field(j, "trials", c.trials);
    c.n_slots = read_field(j, "n_slots", c.n_slots);
    c.warmup_slots = read_field(j, "warmup_slots", c.warmup_slots);
    c.seed = read_field(j, "seed", c.seed);
    c.output = read_field(j, "output", c.output);
    c.threads = read_field(j, "threads", c.threads);

    c.validate();
    return c;
}

/// Reads a JSON config file. An empty (or whitespace-only) file yields all defaults.
inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("<file>", "cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        return parse_config(nlohmann::json::object());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

}  // namespace keyrelay
