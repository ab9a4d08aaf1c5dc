// projlab command-line runner: batch experiments with reproducible
// seeding, JSON reports and CSV data files.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "projlab/experiments.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& out_override,
                bool seed_set, std::uint64_t seed_override, int threads_override,
                const std::string& profile_override) {
    using namespace projlab;
    experiments::ExperimentConfig config = experiments::ExperimentConfig::from_file(config_path);
    if (!out_override.empty()) config.out_dir = out_override;
    if (seed_set) config.seed = seed_override;
    if (threads_override > 0) config.threads = threads_override;
    if (!profile_override.empty()) {
        if (profile_override != "quick" && profile_override != "full") {
            throw ConfigError("--profile: must be 'quick' or 'full'");
        }
        config.profile = profile_override;
    }
    const auto report = experiments::run(config);
    int failures = 0;
    for (const auto& check : report.checks) {
        std::cout << (check.pass ? "[PASS] " : "[FAIL] ") << check.name
                  << "  value=" << experiments::fmt17(check.value)
                  << "  gate=" << experiments::fmt17(check.gate) << "\n";
        if (!check.pass) ++failures;
    }
    std::cout << "report: " << config.resolve_out_dir() << "/report.json\n";
    if (failures > 0) {
        std::cout << failures << " gate(s) failed\n";
        return 2;
    }
    std::cout << "all gates passed\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"projlab: projection-concentration numerical laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_override, profile_override, run_dir;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    int threads_override = 0;
    std::uint64_t selftest_seed = 20240001ULL;

    auto* run_cmd = app.add_subcommand("run", "execute an experiment config");
    run_cmd->add_option("config", config_path, "JSON experiment configuration")->required();
    run_cmd->add_option("--out", out_override, "output directory override");
    run_cmd->add_option("--seed", seed_override, "master seed override")
        ->each([&](const std::string&) { seed_set = true; });
    run_cmd->add_option("--threads", threads_override, "worker thread count");
    run_cmd->add_option("--profile", profile_override, "quick|full profile override");

    auto* report_cmd = app.add_subcommand("report", "pretty-print a run directory");
    report_cmd->add_option("run_dir", run_dir, "directory containing report.json")->required();

    auto* selftest_cmd = app.add_subcommand("selftest", "metrics/algebra oracle suites");
    selftest_cmd->add_option("--seed", selftest_seed, "selftest seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            return run_command(config_path, out_override, seed_set, seed_override,
                               threads_override, profile_override);
        }
        if (report_cmd->parsed()) {
            std::cout << projlab::experiments::format_run_dir(run_dir);
            return 0;
        }
        if (selftest_cmd->parsed()) {
            return projlab::experiments::selftest(selftest_seed) ? 0 : 2;
        }
    } catch (const projlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const projlab::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
