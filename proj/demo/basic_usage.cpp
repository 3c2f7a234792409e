// Minimal use of the library: rates for one fading draw, the scheme's
// decision at a few buffer levels, and a short throughput simulation.

#include <iostream>

#include "keyrelay/keyrelay.hpp"

int main()
{
    using namespace keyrelay;

    SystemParams p;  // 10 dBm at Alice, 20 dBm at Bob and the relay, b = 2000 bits
    Rng rng(42);
    const auto s = sample_slot(p, rng);
    const auto r = compute_rates(s, p, RsiMode::fast);

    std::cout << "gains ab=" << s.g_ab << " ar=" << s.g_ar << " rb=" << s.g_rb << '\n'
              << "R_sec_AB=" << r.r_sec_ab << " R_RT_HD=" << r.r_rt_hd << " R_RT_FD=" << r.r_rt_fd
              << " (P_B=" << r.p_b_selected << " mW)\n";

    for (std::int64_t q : {std::int64_t{0}, p.b_bits, p.l_max_bits}) {
        const auto d = decide_slot({q}, r, p);
        std::cout << "q=" << q << ": " << to_string(d.mode) << " delta=" << d.key_delta_bits << '\n';
    }

    const auto sim = run_trajectory(p, RsiMode::fast, 100000, 7);
    std::cout << "throughput " << sim.mu_empirical << " +/- " << sim.ci_halfwidth << " packets/slot\n";
}
