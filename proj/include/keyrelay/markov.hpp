#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "keyrelay/channel.hpp"
#include "keyrelay/params.hpp"
#include "keyrelay/rates.hpp"
#include "keyrelay/scheme.hpp"

namespace keyrelay {

/// Distribution of the signed per-slot key delta (bits, before clamping)
/// for one buffer regime.
struct IncrementDistribution {
    Regime regime = Regime::below_b;
    std::map<std::int64_t, double> pmf;

    [[nodiscard]] double total() const
    {
        double t = 0.0;
        for (const auto& [d, pr] : pmf)
            t += pr;
        return t;
    }
};

/// Probabilities of the three secure-delivery events of the throughput formula.
struct RateEventProbabilities {
    double p_secure_direct = 0.0;  // R_sec_AB >= R_d
    double p_relay = 0.0;          // R_sec_AB < R_d, best relaying rate >= R_d
    double p_direct = 0.0;         // R_sec_AB < R_d, relaying < R_d, R_DT >= R_d
};

struct IncrementEstimate {
    std::array<IncrementDistribution, 3> regimes;
    RateEventProbabilities events;
    std::int64_t n_samples = 0;
};

/// Classifies a rate tuple into the secure-delivery events (0 = none, 1..3).
inline int delivery_event(const RateTuple& r, const SystemParams& p)
{
    const double rd = p.r_d();
    if (r.r_sec_ab >= rd)
        return 1;
    if (std::max(r.r_rt_fd, r.r_rt_hd) >= rd)
        return 2;
    if (r.r_dt >= rd)
        return 3;
    return 0;
}

/// Histograms decide_slot's key delta for each regime over `n_samples`
/// channel draws. The same draw is classified under all three regimes using
/// representative levels 0, b and L_max.
inline IncrementEstimate estimate_increments(const SystemParams& params, RsiMode mode, std::int64_t n_samples,
                                             Rng& rng)
{
    if (n_samples < 10000)
        throw std::invalid_argument("estimate_increments: need at least 10^4 samples");
    params.validate();

    const std::array<KeyQueueState, 3> levels{
        KeyQueueState{0}, KeyQueueState{params.b_bits}, KeyQueueState{params.l_max_bits}};
    const bool has_mid = params.b_bits < params.l_max_bits;

    std::array<std::map<std::int64_t, std::int64_t>, 3> counts;
    std::array<std::int64_t, 4> event_counts{};
    for (std::int64_t i = 0; i < n_samples; ++i) {
        const auto s = sample_slot(params, rng);
        const auto r = compute_rates(s, params, mode, &rng);
        ++event_counts[static_cast<std::size_t>(delivery_event(r, params))];
        for (std::size_t g = 0; g < 3; ++g) {
            if (g == 1 && !has_mid)
                continue;
            ++counts[g][decide_slot(levels[g], r, params).key_delta_bits];
        }
    }

    IncrementEstimate est;
    est.n_samples = n_samples;
    const double n = static_cast<double>(n_samples);
    for (std::size_t g = 0; g < 3; ++g) {
        auto& dist = est.regimes[g];
        dist.regime = static_cast<Regime>(g);
        if (g == 1 && !has_mid) {
            dist.pmf[0] = 1.0;  // regime unreachable, any stochastic row will do
            continue;
        }
        for (const auto& [d, c] : counts[g])
            dist.pmf[d] = static_cast<double>(c) / n;
    }
    est.events.p_secure_direct = static_cast<double>(event_counts[1]) / n;
    est.events.p_relay = static_cast<double>(event_counts[2]) / n;
    est.events.p_direct = static_cast<double>(event_counts[3]) / n;
    return est;
}

/// Row-stochastic matrix in compressed sparse row form.
struct SparseMatrix {
    std::size_t rows = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<std::size_t> col;
    std::vector<double> val;

    [[nodiscard]] std::size_t nonzeros() const { return val.size(); }

    [[nodiscard]] double row_sum(std::size_t i) const
    {
        double s = 0.0;
        for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
            s += val[k];
        return s;
    }

    /// y = x * T
    void left_multiply(std::span<const double> x, std::span<double> y) const
    {
        std::fill(y.begin(), y.end(), 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            const double xi = x[i];
            if (xi == 0.0)
                continue;
            for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
                y[col[k]] += xi * val[k];
        }
    }
};

/// Key-buffer Markov chain over quantized levels 0, D, 2D, ..., L_max.
struct MarkovModel {
    std::size_t state_count = 0;
    std::int64_t bin_width_bits = 1;
    SparseMatrix transitions;
    std::vector<double> steady_state;  // filled by steady_state()

    [[nodiscard]] std::int64_t state_bits(std::size_t i) const
    {
        return static_cast<std::int64_t>(i) * bin_width_bits;
    }

    /// Chain from an explicit dense row-stochastic matrix (bin width 1).
    static MarkovModel from_dense(const std::vector<std::vector<double>>& rows)
    {
        MarkovModel m;
        m.state_count = rows.size();
        m.transitions.rows = rows.size();
        for (const auto& row : rows) {
            if (row.size() != rows.size())
                throw std::invalid_argument("MarkovModel::from_dense: matrix must be square");
            for (std::size_t j = 0; j < row.size(); ++j) {
                if (row[j] != 0.0) {
                    m.transitions.col.push_back(j);
                    m.transitions.val.push_back(row[j]);
                }
            }
            m.transitions.row_ptr.push_back(m.transitions.col.size());
        }
        return m;
    }
};

/// Builds the quantized chain. Row i uses the pmf of level i*D's regime; a
/// destination level is clamped to [0, L_max] and its mass split between the
/// two neighbouring grid states so the mean step is preserved. With D = 1
/// the chain is exact at bit resolution.
inline MarkovModel build_chain(const std::array<IncrementDistribution, 3>& incs, const SystemParams& params,
                               std::int64_t bin_width)
{
    if (bin_width < 1 || params.l_max_bits % bin_width != 0)
        throw std::invalid_argument("build_chain: bin width " + std::to_string(bin_width) +
                                    " must divide L_max = " + std::to_string(params.l_max_bits));
    for (const auto& inc : incs)
        if (inc.pmf.empty())
            throw std::invalid_argument("build_chain: empty increment pmf for regime " +
                                        std::string(to_string(inc.regime)));

    MarkovModel m;
    m.bin_width_bits = bin_width;
    m.state_count = static_cast<std::size_t>(params.l_max_bits / bin_width) + 1;
    m.transitions.rows = m.state_count;

    std::vector<double> acc(m.state_count, 0.0);
    std::vector<std::size_t> touched;
    auto add = [&](std::size_t j, double w) {
        if (w == 0.0)
            return;
        if (acc[j] == 0.0)
            touched.push_back(j);
        acc[j] += w;
    };

    for (std::size_t i = 0; i < m.state_count; ++i) {
        const std::int64_t q = m.state_bits(i);
        const auto& pmf = incs[static_cast<std::size_t>(regime_of(q, params))].pmf;
        for (const auto& [d, pr] : pmf) {
            const std::int64_t dest = std::clamp<std::int64_t>(q + d, 0, params.l_max_bits);
            const std::int64_t lo = dest / bin_width;
            const std::int64_t rem = dest % bin_width;
            const double frac = static_cast<double>(rem) / static_cast<double>(bin_width);
            add(static_cast<std::size_t>(lo), pr * (1.0 - frac));
            if (rem != 0)
                add(static_cast<std::size_t>(lo + 1), pr * frac);
        }
        std::sort(touched.begin(), touched.end());
        for (std::size_t j : touched) {
            m.transitions.col.push_back(j);
            m.transitions.val.push_back(acc[j]);
            acc[j] = 0.0;
        }
        touched.clear();
        m.transitions.row_ptr.push_back(m.transitions.col.size());
    }
    return m;
}

class ChainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ReducibleChainError : public ChainError {
public:
    ReducibleChainError(std::vector<std::size_t> states, const std::string& what)
        : ChainError(what), states_(std::move(states))
    {
    }
    [[nodiscard]] const std::vector<std::size_t>& states() const { return states_; }

private:
    std::vector<std::size_t> states_;
};

class NonConvergenceError : public ChainError {
public:
    NonConvergenceError(double residual, std::size_t iterations)
        : ChainError("steady_state: power iteration did not converge after " + std::to_string(iterations) +
                     " iterations (L1 residual " + std::to_string(residual) + ")"),
          residual_(residual)
    {
    }
    [[nodiscard]] double residual() const { return residual_; }

private:
    double residual_;
};

struct SteadyStateOptions {
    double tolerance = 1e-11;          // on ||pi T - pi||_1
    std::size_t max_iterations = 1000000;
    bool verify_two_starts = true;     // second start from the uniform vector
    double start_agreement = 1e-8;     // total variation between the two results
};

struct SteadyStateInfo {
    double residual = 0.0;
    std::size_t iterations = 0;
    bool slow_mixing = false;  // residual decayed slower than 1e-3 per 1000 steps at some point
};

namespace detail {

// States from which state 0 is reachable, via reverse traversal of T.
inline std::vector<bool> reaches_state_zero(const SparseMatrix& t)
{
    std::vector<std::vector<std::size_t>> reverse(t.rows);
    for (std::size_t i = 0; i < t.rows; ++i)
        for (std::size_t k = t.row_ptr[i]; k < t.row_ptr[i + 1]; ++k)
            if (t.val[k] > 0.0)
                reverse[t.col[k]].push_back(i);
    std::vector<bool> seen(t.rows, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
        const std::size_t j = stack.back();
        stack.pop_back();
        for (std::size_t i : reverse[j]) {
            if (!seen[i]) {
                seen[i] = true;
                stack.push_back(i);
            }
        }
    }
    return seen;
}

inline std::vector<double> power_iterate(const SparseMatrix& t, std::vector<double> x, const SteadyStateOptions& opt,
                                         SteadyStateInfo& info)
{
    std::vector<double> y(x.size());
    double residual = std::numeric_limits<double>::infinity();
    double checkpoint = residual;
    for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
        t.left_multiply(x, y);
        double sum = 0.0;
        for (double v : y)
            sum += v;
        residual = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] /= sum;
            residual += std::fabs(y[i] - x[i]);
        }
        x.swap(y);
        if (residual <= opt.tolerance) {
            info.residual = residual;
            info.iterations = it;
            return x;
        }
        if (it % 1000 == 0) {
            if (residual > 1e-3 * checkpoint && std::isfinite(checkpoint))
                info.slow_mixing = true;
            checkpoint = residual;
        }
    }
    throw NonConvergenceError(residual, opt.max_iterations);
}

}  // namespace detail

/// Stationary distribution by repeated multiplication pi <- pi T from a
/// point mass at level 0.
///
/// Throws ReducibleChainError when some level cannot reach level 0 (more than
/// one closed class), NonConvergenceError when the residual never reaches the
/// tolerance (periodic or extremely slow chains), and ChainError when the
/// second start lands elsewhere.
inline std::vector<double> steady_state(MarkovModel& model, const SteadyStateOptions& opt = {},
                                        SteadyStateInfo* info_out = nullptr)
{
    const std::size_t n = model.state_count;
    if (n == 0)
        throw ChainError("steady_state: empty chain");
    for (std::size_t i = 0; i < n; ++i)
        if (std::fabs(model.transitions.row_sum(i) - 1.0) > 1e-9)
            throw ChainError("steady_state: row " + std::to_string(i) + " is not stochastic");

    const auto reach = detail::reaches_state_zero(model.transitions);
    std::vector<std::size_t> stuck;
    for (std::size_t i = 0; i < n; ++i)
        if (!reach[i])
            stuck.push_back(i);
    if (!stuck.empty()) {
        std::string list;
        for (std::size_t k = 0; k < std::min<std::size_t>(stuck.size(), 16); ++k)
            list += (k ? ", " : "") + std::to_string(stuck[k]);
        if (stuck.size() > 16)
            list += ", ...";
        throw ReducibleChainError(stuck, "steady_state: chain is reducible; states cannot reach state 0: " + list);
    }

    SteadyStateInfo info;
    std::vector<double> start(n, 0.0);
    start[0] = 1.0;
    auto pi = detail::power_iterate(model.transitions, std::move(start), opt, info);

    if (opt.verify_two_starts && n > 1) {
        SteadyStateInfo other;
        auto pi2 = detail::power_iterate(model.transitions, std::vector<double>(n, 1.0 / static_cast<double>(n)),
                                         opt, other);
        double tv = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            tv += std::fabs(pi[i] - pi2[i]);
        tv *= 0.5;
        if (tv > opt.start_agreement)
            throw ChainError("steady_state: starts disagree (total variation " + std::to_string(tv) + ")");
    }

    if (info_out)
        *info_out = info;
    model.steady_state = pi;
    return pi;
}

/// ||pi T - pi||_1
inline double stationarity_residual(const MarkovModel& model, std::span<const double> pi)
{
    std::vector<double> y(pi.size());
    model.transitions.left_multiply(pi, y);
    double r = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i)
        r += std::fabs(y[i] - pi[i]);
    return r;
}

struct ThroughputReport {
    double mu_sec_analytic = 0.0;
    double mu_sec_montecarlo = std::numeric_limits<double>::quiet_NaN();
    double ci_halfwidth = std::numeric_limits<double>::quiet_NaN();  // of the Monte Carlo value
    double pr_q_ge_b = 0.0;
    RateEventProbabilities events;
};

/// mu = P(secure direct) + P(Q >= b) * (P(relay) + P(keyed direct)).
inline ThroughputReport secure_throughput_analytic(const MarkovModel& model, const SystemParams& params,
                                                   const RateEventProbabilities& events)
{
    if (model.steady_state.size() != model.state_count)
        throw std::invalid_argument("secure_throughput_analytic: steady state not computed");
    ThroughputReport rep;
    rep.events = events;
    for (std::size_t i = 0; i < model.state_count; ++i)
        if (model.state_bits(i) >= params.b_bits)
            rep.pr_q_ge_b += model.steady_state[i];
    rep.pr_q_ge_b = std::clamp(rep.pr_q_ge_b, 0.0, 1.0);
    rep.mu_sec_analytic = events.p_secure_direct + rep.pr_q_ge_b * (events.p_relay + events.p_direct);
    return rep;
}

/// Maps a bit-resolution occupancy histogram onto the chain's grid with the
/// same neighbour split build_chain uses.
inline std::vector<double> bin_occupancy(std::span<const double> per_bit, std::int64_t bin_width)
{
    if (bin_width < 1 || per_bit.empty() || (per_bit.size() - 1) % static_cast<std::size_t>(bin_width) != 0)
        throw std::invalid_argument("bin_occupancy: bin width must divide L_max");
    const std::size_t states = (per_bit.size() - 1) / static_cast<std::size_t>(bin_width) + 1;
    std::vector<double> out(states, 0.0);
    for (std::size_t q = 0; q < per_bit.size(); ++q) {
        const std::size_t lo = q / static_cast<std::size_t>(bin_width);
        const std::size_t rem = q % static_cast<std::size_t>(bin_width);
        const double frac = static_cast<double>(rem) / static_cast<double>(bin_width);
        out[lo] += per_bit[q] * (1.0 - frac);
        if (rem != 0)
            out[lo + 1] += per_bit[q] * frac;
    }
    return out;
}

inline double total_variation(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw std::invalid_argument("total_variation: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::fabs(a[i] - b[i]);
    return 0.5 * s;
}

inline void write_steady_state_csv(std::ostream& os, const MarkovModel& model)
{
    os << "state_bits,probability\n";
    const auto old = os.precision(17);
    for (std::size_t i = 0; i < model.steady_state.size(); ++i)
        os << model.state_bits(i) << ',' << model.steady_state[i] << '\n';
    os.precision(old);
}

}  // namespace keyrelay
