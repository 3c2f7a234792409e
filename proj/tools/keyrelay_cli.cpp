// Command-line driver: loads a JSON config, runs one experiment, writes CSV
// and gnuplot files to the output directory.
//
// Exit status: 0 all checks passed, 1 a validation check failed, 2 bad
// configuration or command line.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "keyrelay/keyrelay.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Secret-key aided untrusted relaying: rate and throughput experiments"};
    std::string config_path;
    std::optional<std::string> experiment;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
    app.add_option("--config", config_path, "JSON config file (empty file = defaults)");
    app.add_option("--experiment", experiment, "fig1_rates | fig2_throughput | validate_closed_forms | validate_chain");
    app.add_option("--seed", seed, "master RNG seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitPass : kExitConfig;
    }

    keyrelay::ExperimentConfig cfg;
    try {
        cfg = config_path.empty() ? keyrelay::parse_config(nlohmann::json::object())
                                  : keyrelay::load_config(config_path);
        if (experiment)
            cfg.experiment = keyrelay::parse_experiment(*experiment);
        if (seed)
            cfg.seed = *seed;
        if (out_dir)
            cfg.output = *out_dir;
        if (threads)
            cfg.threads = *threads;
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    keyrelay::ExperimentOutcome outcome;
    try {
        outcome = keyrelay::run_experiment(cfg, cfg.output);
    } catch (const keyrelay::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }

    for (const auto& c : outcome.checks)
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << c.value << " threshold=" << c.threshold
                  << '\n';
    for (const auto& a : outcome.artifacts)
        std::cout << "wrote " << a.string() << '\n';
    return outcome.passed() ? kExitPass : kExitValidation;
}
