#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "keyrelay/channel.hpp"
#include "keyrelay/config.hpp"
#include "keyrelay/markov.hpp"
#include "keyrelay/montecarlo.hpp"
#include "keyrelay/parallel.hpp"
#include "keyrelay/rates.hpp"
#include "keyrelay/special_functions.hpp"

namespace keyrelay {

struct CheckResult {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool passed = false;
};

struct ExperimentOutcome {
    std::vector<CheckResult> checks;
    std::vector<std::filesystem::path> artifacts;

    [[nodiscard]] bool passed() const
    {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
    }
};

// ---------------------------------------------------------------------------
// Output helpers

inline std::ofstream open_output(const std::filesystem::path& path)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot write '" + path.string() + "'");
    os.precision(10);
    return os;
}

inline void write_checks_csv(const std::filesystem::path& path, const std::vector<CheckResult>& checks)
{
    auto os = open_output(path);
    os << "check,value,threshold,passed\n";
    for (const auto& c : checks)
        os << c.name << ',' << c.value << ',' << c.threshold << ',' << (c.passed ? 1 : 0) << '\n';
}

inline void write_gnuplot(const std::filesystem::path& script, const std::string& csv_name, const std::string& title,
                          const std::string& xlabel, const std::string& ylabel, const std::vector<std::string>& series,
                          bool logx = false)
{
    auto os = open_output(script);
    os << "set datafile separator ','\n"
       << "set key autotitle columnhead\n"
       << "set terminal pngcairo size 900,600\n"
       << "set output '" << std::filesystem::path(csv_name).replace_extension(".png").string() << "'\n"
       << "set title '" << title << "'\n"
       << "set xlabel '" << xlabel << "'\n"
       << "set ylabel '" << ylabel << "'\n"
       << "set grid\n";
    if (logx)
        os << "set logscale x\n";
    os << "plot ";
    for (std::size_t i = 0; i < series.size(); ++i)
        os << (i ? ", \\\n     " : "") << "'" << csv_name << "' " << series[i];
    os << '\n';
}

inline nlohmann::json to_json(const ThroughputReport& r)
{
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"mu_sec_analytic", r.mu_sec_analytic},
            {"mu_sec_montecarlo", num(r.mu_sec_montecarlo)},
            {"ci_halfwidth", num(r.ci_halfwidth)},
            {"pr_q_ge_b", r.pr_q_ge_b},
            {"p_secure_direct", r.events.p_secure_direct},
            {"p_relay", r.events.p_relay},
            {"p_direct", r.events.p_direct}};
}

// ---------------------------------------------------------------------------
// Rate comparison (average end-to-end relaying rate)

struct Fig1Row {
    double sweep_value = 0.0;
    double rate_slow_closed = 0.0;
    double rate_fast_closed = 0.0;
    double rate_fast_numeric_mc = 0.0;
    double rate_conventional = 0.0;
};

inline ExperimentConfig with_axis(ExperimentConfig c, const std::string& axis, double value)
{
    if (axis == "var_bb")
        c.var_bb = value;
    else if (axis == "p_r_dbm")
        c.p_r_dbm = value;
    else if (axis == "p_b_dbm")
        c.p_b_dbm = value;
    else if (axis == "p_a_dbm")
        c.p_a_dbm = value;
    else
        throw ConfigError("sweep.axis", "unknown axis '" + axis + "'");
    return c;
}

/// Averages of the four relaying rates over `samples` channel draws at Bob's
/// full power. numeric_symbols = 0 skips the numeric column.
inline Fig1Row rate_comparison_point(const SystemParams& p, std::int64_t samples, std::int64_t numeric_symbols,
                                     std::uint64_t seed)
{
    Rng rng(seed);
    SystemParams numeric = p;
    numeric.m_block = 1;
    numeric.n_symbols = std::max<std::int64_t>(numeric_symbols, 1);

    double slow = 0.0, fast = 0.0, num = 0.0, conv = 0.0;
    for (std::int64_t i = 0; i < samples; ++i) {
        const auto s = sample_slot(p, rng);
        slow += rate_rt_fd_slow(s, p);
        fast += rate_rt_fd_fast(s, p, p.p_b_max);
        conv += rate_rt_fd_conventional(s, p, p.p_b_max, exponential(rng, p.var_bb));
        if (numeric_symbols > 0)
            num += rate_rt_fd_numeric(s, numeric, p.p_b_max, rng);
    }
    const double n = static_cast<double>(samples);
    Fig1Row row;
    row.rate_slow_closed = slow / n;
    row.rate_fast_closed = fast / n;
    row.rate_fast_numeric_mc = numeric_symbols > 0 ? num / n : std::numeric_limits<double>::quiet_NaN();
    row.rate_conventional = conv / n;
    return row;
}

inline ExperimentOutcome run_fig1(const ExperimentConfig& cfg, const std::filesystem::path& out_dir)
{
    std::vector<Fig1Row> rows(cfg.sweep_values.size());
    parallel_for(rows.size(), cfg.threads, [&](std::size_t i) {
        const auto params = with_axis(cfg, cfg.sweep_axis, cfg.sweep_values[i]).system_params();
        rows[i] = rate_comparison_point(params, cfg.samples, cfg.fig1_numeric_symbols, derive_seed(cfg.seed, i));
        rows[i].sweep_value = cfg.sweep_values[i];
    });

    ExperimentOutcome out;
    const auto csv = out_dir / "fig1_rates.csv";
    {
        auto os = open_output(csv);
        os << "sweep_value,rate_slow_closed,rate_fast_closed,rate_fast_numeric_mc,rate_conventional\n";
        for (const auto& r : rows)
            os << r.sweep_value << ',' << r.rate_slow_closed << ',' << r.rate_fast_closed << ','
               << r.rate_fast_numeric_mc << ',' << r.rate_conventional << '\n';
    }
    const auto gp = out_dir / "fig1_rates.gp";
    write_gnuplot(gp, csv.filename().string(), "Average end-to-end relaying rate", cfg.sweep_axis,
                  "rate (bits/s/Hz)",
                  {"using 1:2 with linespoints", "using 1:3 with linespoints", "using 1:4 with points",
                   "using 1:5 with linespoints"},
                  cfg.sweep_axis == "var_bb");
    out.artifacts = {csv, gp};

    for (const auto& r : rows) {
        const std::string at = "@" + cfg.sweep_axis + "=" + std::to_string(r.sweep_value);
        const double gap = r.rate_fast_closed - r.rate_conventional;
        out.checks.push_back({"fast_ge_conventional" + at, gap, 0.0, gap >= 0.0});
        const double err = std::fabs(r.rate_fast_closed - r.rate_fast_numeric_mc);
        out.checks.push_back({"fast_closed_vs_numeric" + at, err, 1e-2, err <= 1e-2});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Secure throughput versus buffer size

struct Fig2Row {
    double r_d = 0.0;
    std::int64_t l_max_packets = 0;
    double mu_analytic = 0.0;
    double mu_montecarlo = 0.0;
    double ci = 0.0;
    double std_error = 0.0;
    double pr_q_ge_b = 0.0;
};

/// Analytic throughput from the buffer chain for one parameter set.
inline ThroughputReport analytic_throughput(const SystemParams& p, const IncrementEstimate& est,
                                            std::int64_t bin_width, MarkovModel* model_out = nullptr)
{
    auto model = build_chain(est.regimes, p, bin_width);
    steady_state(model);
    auto rep = secure_throughput_analytic(model, p, est.events);
    if (model_out)
        *model_out = std::move(model);
    return rep;
}

inline std::vector<Fig2Row> throughput_sweep(const ExperimentConfig& cfg)
{
    std::vector<Fig2Row> rows;
    for (std::size_t ri = 0; ri < cfg.r_d_values.size(); ++ri) {
        ExperimentConfig c = cfg;
        c.b_bits = cfg.packet_bits_for(cfg.r_d_values[ri]);
        c.l_max_packets = cfg.l_max_packets_values.back();
        const auto base = c.system_params();

        Rng inc_rng = make_stream(cfg.seed, 1000 + ri);
        const auto est = estimate_increments(base, cfg.rsi_mode, cfg.increment_samples, inc_rng);

        std::vector<SystemParams> grid;
        for (auto l : cfg.l_max_packets_values) {
            auto p = base;
            p.l_max_bits = l * base.b_bits;
            grid.push_back(p);
        }
        SimOptions opt;
        opt.warmup_slots = cfg.warmup_slots;
        opt.common_random_numbers = true;
        const auto points =
            run_batch(grid, cfg.rsi_mode, cfg.trials, cfg.n_slots, derive_seed(cfg.seed, ri), opt, cfg.threads);

        for (std::size_t k = 0; k < grid.size(); ++k) {
            const std::int64_t width = std::gcd(cfg.bin_width_bits, grid[k].l_max_bits);
            const auto rep = analytic_throughput(grid[k], est, width);
            rows.push_back({cfg.r_d_values[ri], cfg.l_max_packets_values[k], rep.mu_sec_analytic,
                            points[k].mu_mean, points[k].ci_halfwidth, points[k].std_error, rep.pr_q_ge_b});
        }
    }
    return rows;
}

inline ExperimentOutcome run_fig2(const ExperimentConfig& cfg, const std::filesystem::path& out_dir)
{
    const auto rows = throughput_sweep(cfg);

    ExperimentOutcome out;
    const auto csv = out_dir / "fig2_throughput.csv";
    {
        auto os = open_output(csv);
        os << "r_d,l_max_packets,mu_analytic,mu_montecarlo,ci,pr_q_ge_b\n";
        for (const auto& r : rows)
            os << r.r_d << ',' << r.l_max_packets << ',' << r.mu_analytic << ',' << r.mu_montecarlo << ',' << r.ci
               << ',' << r.pr_q_ge_b << '\n';
    }
    const auto gp = out_dir / "fig2_throughput.gp";
    write_gnuplot(gp, csv.filename().string(), "Secure throughput versus key buffer size", "L_max (packets)",
                  "throughput (packets/slot)",
                  {"using 2:3 with linespoints title 'analytic'",
                   "using 2:4:5 with yerrorbars title 'Monte Carlo'"});
    out.artifacts = {csv, gp};

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::string at = "@r_d=" + std::to_string(r.r_d) + ",L=" + std::to_string(r.l_max_packets);
        const double tol = std::max(2.0 * r.std_error, 0.02);
        const double err = std::fabs(r.mu_analytic - r.mu_montecarlo);
        out.checks.push_back({"analytic_vs_montecarlo" + at, err, tol, err <= tol});
        out.checks.push_back({"mu_at_most_one" + at, r.mu_montecarlo, 1.0, r.mu_montecarlo <= 1.0});
        if (i > 0 && rows[i - 1].r_d == r.r_d) {
            const auto& prev = rows[i - 1];
            const double slack = std::max(prev.std_error, r.std_error);
            const double step = r.mu_montecarlo - prev.mu_montecarlo;
            out.checks.push_back({"non_decreasing" + at, step, -slack, step >= -slack});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Closed-form validation

/// Mean of the fast-RSI numeric evaluator over `codewords` independent key
/// codewords of `symbols` symbols each (M = 1).
inline double numeric_fast_mean(const ChannelSample& s, const SystemParams& p, double p_b, std::int64_t codewords,
                                std::int64_t symbols, Rng& rng)
{
    SystemParams q = p;
    q.m_block = 1;
    q.n_symbols = symbols;
    double sum = 0.0;
    for (std::int64_t k = 0; k < codewords; ++k)
        sum += rate_rt_fd_numeric(s, q, p_b, rng);
    return sum / static_cast<double>(codewords);
}

inline std::vector<CheckResult> closed_form_checks(const ExperimentConfig& cfg)
{
    std::vector<CheckResult> checks;
    const auto params = cfg.system_params();

    {
        int violations = 0;
        for (int i = 0; i <= 240; ++i) {
            const double x = std::pow(10.0, -6.0 + 12.0 * i / 240.0);
            const double v = scaled_exp_integral(x);
            if (!(v > 1.0 / (x + 1.0) && v < 1.0 / x))
                ++violations;
        }
        checks.push_back({"scaled_exp_integral_bracketing", static_cast<double>(violations), 0.0, violations == 0});
    }
    {
        double worst = 0.0;
        for (int i = 0; i <= 200; ++i) {
            const double x = std::pow(10.0, -6.0 + 8.8 * i / 200.0);  // up to ~630, where e^-x is representable
            const double a = scaled_exp_integral(x);
            const double b = std::exp(x) * exp_integral(x);
            worst = std::max(worst, std::fabs(a - b) / a);
        }
        checks.push_back({"scaled_vs_unscaled_exp_integral", worst, 1e-9, worst <= 1e-9});
    }
    {
        // Closed form against the block evaluator averaged over 10^4 codewords;
        // the relay decoding cap is left out so the average is exact.
        SystemParams p = params;
        p.cap_fd_by_relay_decoding = false;
        Rng rng = make_stream(cfg.seed, 11);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto s = sample_slot(p, rng);
            const double closed = rate_rt_fd_fast(s, p, p.p_b_max);
            const double numeric = numeric_fast_mean(s, p, p.p_b_max, 10000, 100, rng);
            worst = std::max(worst, std::fabs(closed - numeric));
        }
        checks.push_back({"fast_closed_vs_numeric_max_abs", worst, 1e-2, worst <= 1e-2});
    }
    {
        SystemParams p = params;
        p.n_symbols = 10000;
        p.m_block = p.n_symbols;
        Rng rng = make_stream(cfg.seed, 12);
        const double gamma2 = 1.0 / p.kappa;
        const double bound =
            std::log2(1.0 + gamma2 * p.var_bb * static_cast<double>(p.n_symbols) * p.p_b_max) /
                static_cast<double>(p.n_symbols) +
            1e-3;
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto s = sample_slot(p, rng);
            worst = std::max(worst, std::fabs(rate_rt_fd_numeric(s, p, p.p_b_max, rng) - rate_rt_fd_slow(s, p)));
        }
        checks.push_back({"slow_numeric_vs_closed_max_abs", worst, bound, worst <= bound});
    }
    {
        Rng rng = make_stream(cfg.seed, 13);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const auto s = sample_slot(params, rng);
            const double ref = rate_rt_fd_slow(s, params, params.p_b_max);
            for (double v : {0.0, 0.01, 0.2, 1.0, 10.0}) {
                SystemParams q = params;
                q.var_bb = v;
                for (double pb : {0.0, 1.0, params.p_b_max})
                    worst = std::max(worst, std::fabs(rate_rt_fd_slow(s, q, pb) - ref));
            }
        }
        checks.push_back({"slow_closed_rsi_invariance", worst, 0.0, worst == 0.0});
    }
    {
        double worst_gap = std::numeric_limits<double>::infinity();
        const std::vector<double> values = cfg.sweep_axis == "var_bb"
                                               ? cfg.sweep_values
                                               : std::vector<double>{0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
        for (std::size_t i = 0; i < values.size(); ++i) {
            SystemParams p = params;
            p.var_bb = values[i];
            const auto row = rate_comparison_point(p, std::max<std::int64_t>(cfg.samples, 100000), 0,
                                                   derive_seed(cfg.seed, 100 + i));
            worst_gap = std::min(worst_gap, row.rate_fast_closed - row.rate_conventional);
        }
        checks.push_back({"fast_minus_conventional_min_mean_gap", worst_gap, 0.0, worst_gap >= 0.0});
    }
    {
        // Bob's power search lands on the target rate when it is interior.
        Rng rng = make_stream(cfg.seed, 14);
        double worst = 0.0;
        int found = 0;
        for (int i = 0; i < 200000 && found < 200; ++i) {
            const auto s = sample_slot(params, rng);
            const auto sel = select_bob_power(s, params, RsiMode::fast);
            if (sel.feasible && sel.p_b > 0.0 && sel.p_b < params.p_b_max) {
                worst = std::max(worst, std::fabs(sel.rate - params.r_d()));
                ++found;
            }
        }
        checks.push_back({"bob_power_search_rate_error", worst, 1e-5, found > 0 && worst <= 1e-5});
    }
    return checks;
}

inline ExperimentOutcome run_validate_closed_forms(const ExperimentConfig& cfg, const std::filesystem::path& out_dir)
{
    ExperimentOutcome out;
    out.checks = closed_form_checks(cfg);
    const auto csv = out_dir / "validate_closed_forms.csv";
    write_checks_csv(csv, out.checks);
    const auto gp = out_dir / "validate_closed_forms.gp";
    write_gnuplot(gp, csv.filename().string(), "Closed-form validation residuals", "check", "value",
                  {"using 0:2:xtic(1) with boxes title 'value'", "using 0:3 with points title 'threshold'"});
    out.artifacts = {csv, gp};
    return out;
}

// ---------------------------------------------------------------------------
// Markov chain validation

inline ExperimentOutcome run_validate_chain(const ExperimentConfig& cfg, const std::filesystem::path& out_dir)
{
    ExperimentOutcome out;
    const auto params = cfg.system_params();
    Rng inc_rng = make_stream(cfg.seed, 21);
    const auto est = estimate_increments(params, cfg.rsi_mode, cfg.increment_samples, inc_rng);

    double worst_sum = 0.0;
    for (const auto& inc : est.regimes)
        worst_sum = std::max(worst_sum, std::fabs(inc.total() - 1.0));
    out.checks.push_back({"increment_pmf_normalization", worst_sum, 1e-12, worst_sum <= 1e-12});

    const std::int64_t width = std::gcd(cfg.bin_width_bits, params.l_max_bits);
    MarkovModel model;
    auto rep = analytic_throughput(params, est, width, &model);
    const double residual = stationarity_residual(model, model.steady_state);
    out.checks.push_back({"steady_state_residual_l1", residual, 1e-10, residual <= 1e-10});

    if (width % 2 == 0 && params.l_max_bits % (width / 2) == 0) {
        const auto fine = analytic_throughput(params, est, width / 2);
        const double rel_mu = std::fabs(fine.mu_sec_analytic - rep.mu_sec_analytic) / rep.mu_sec_analytic;
        out.checks.push_back({"bin_width_halving_mu_rel", rel_mu, 0.01, rel_mu <= 0.01});
        const double rel_pr = rep.pr_q_ge_b > 0.0 ? std::fabs(fine.pr_q_ge_b - rep.pr_q_ge_b) / rep.pr_q_ge_b : 0.0;
        out.checks.push_back({"bin_width_halving_pr_q_ge_b_rel", rel_pr, 0.01, rel_pr <= 0.01});
    }

    SimOptions opt;
    opt.warmup_slots = cfg.warmup_slots;
    const auto points = run_batch({params}, cfg.rsi_mode, cfg.trials, cfg.n_slots, derive_seed(cfg.seed, 22), opt,
                                  cfg.threads);
    const auto& pt = points.front();
    rep.mu_sec_montecarlo = pt.mu_mean;
    rep.ci_halfwidth = pt.ci_halfwidth;
    const double tol = std::max(2.0 * pt.std_error, 0.02);
    const double err = std::fabs(rep.mu_sec_analytic - pt.mu_mean);
    out.checks.push_back({"analytic_vs_montecarlo_mu", err, tol, err <= tol});
    const double tv = total_variation(model.steady_state, bin_occupancy(pt.mean_occupancy(), width));
    out.checks.push_back({"steady_state_vs_occupancy_tv", tv, 0.05, tv <= 0.05});

    const auto csv = out_dir / "validate_chain.csv";
    write_checks_csv(csv, out.checks);
    const auto pi_csv = out_dir / "steady_state.csv";
    {
        auto os = open_output(pi_csv);
        write_steady_state_csv(os, model);
    }
    const auto pi_gp = out_dir / "steady_state.gp";
    write_gnuplot(pi_gp, pi_csv.filename().string(), "Key buffer steady state", "key bits", "probability",
                  {"using 1:2 with impulses"});
    const auto gp = out_dir / "validate_chain.gp";
    write_gnuplot(gp, csv.filename().string(), "Markov chain validation residuals", "check", "value",
                  {"using 0:2:xtic(1) with boxes title 'value'", "using 0:3 with points title 'threshold'"});
    const auto json_path = out_dir / "throughput_report.json";
    {
        auto os = open_output(json_path);
        os << to_json(rep).dump(2) << '\n';
    }
    out.artifacts = {csv, gp, pi_csv, pi_gp, json_path};
    return out;
}

inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir)
{
    switch (cfg.experiment) {
    case Experiment::fig1_rates: return run_fig1(cfg, out_dir);
    case Experiment::fig2_throughput: return run_fig2(cfg, out_dir);
    case Experiment::validate_closed_forms: return run_validate_closed_forms(cfg, out_dir);
    case Experiment::validate_chain: return run_validate_chain(cfg, out_dir);
    }
    throw std::logic_error("run_experiment: bad experiment");
}

}  // namespace keyrelay
