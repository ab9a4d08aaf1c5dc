#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "projlab/errors.hpp"
#include "projlab/sources.hpp"

namespace projlab::experiments {

// "%.17g" rendering used for every floating-point value written to CSV,
// so reruns compare byte-identically.
std::string fmt17(double v);

// ---------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------

struct SourceSpec {
    // subgaussian-product | isotropic-gaussian | spiked-gaussian | sk-glauber
    std::string kind = "subgaussian-product";
    int n = 200;
    double rho = 1.0;
    double q = 0.0;
    std::string base = "gaussian";  // gaussian | rademacher-shifted | uniform-shifted
    // spiked-gaussian: one sqrt(N) eigenvalue ahead of unit bulk when set.
    bool spike_sqrt_n = true;
    double mean_coordinate = 0.0;
    // sk-glauber
    double beta = 0.3;
    double h = 0.3;
    int burnin = 200;
    int thin = 10;
    std::uint64_t disorder_seed = 1;

    nlohmann::json to_json() const;
    static SourceSpec from_json(const nlohmann::json& j);
    // Builds the source at dimension `n_dim` (n_dim <= 0 uses spec.n).
    std::unique_ptr<sources::VectorSource> make(int n_dim = 0) const;
};

struct ExperimentConfig {
    int schema_version = 1;
    // concentration | theorem-scaling | sk-cavity | converse |
    // haar-moments | metrics-selftest
    std::string kind = "concentration";
    std::uint64_t seed = 0;  // mandatory in files; no default stream
    std::string out_dir;     // empty: runs/<kind>-seed<seed> (env override)
    int threads = 1;
    std::string profile = "quick";  // quick | full

    SourceSpec source;
    std::vector<int> n_list;

    // projection-moment experiments
    int k = 2;
    int p = 1;
    std::string variant = "full";  // partial | full
    int catalog_size = 16;
    std::uint64_t catalog_seed = 7;
    double lip = 1.0;
    double sup_bound = 1.0;
    std::int64_t outer_draws = 256;
    int inner_replicas = 256;
    bool w1_bound_check = true;
    int w1_cloud = 512;
    int w1_reps = 8;

    // concentration / converse
    std::int64_t n_pairs = 4000;
    std::int64_t n_samples = 100000;
    std::vector<double> lambdas = {0.5, 1.0, 2.0};
    double wrong_q_delta = 0.5;

    // haar-moments
    std::vector<int> haar_orders = {4, 6, 10};
    std::int64_t haar_draws = 1000000;
    int drift_n = 20;
    double drift_epsilon = 0.02;
    std::int64_t drift_samples = 200000;

    // sk-cavity
    int n_disorders = 32;
    std::int64_t pairs_per_disorder = 200;
    int cloud_size = 512;

    // metrics-selftest
    std::int64_t selftest_instances = 50;
    std::int64_t quotient_trials = 10000;

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    // FNV-1a over the canonical serialization.
    std::string digest() const;
    // Directory resolution: explicit out_dir, else $PROJLAB_OUT_DIR or
    // ./runs as the parent of <kind>-seed<seed>.
    std::string resolve_out_dir() const;
};

// ---------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------

struct CheckResult {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double gate = 0.0;
    std::string detail;
};

struct RunReport {
    nlohmann::json config_echo;
    std::string config_digest;
    std::vector<CheckResult> checks;
    std::vector<std::string> artifacts;
    // Structured per-experiment results (full domain-type fields), for
    // machine consumption alongside the CSV tables.
    nlohmann::json data;
    double wall_time_s = 0.0;

    bool all_pass() const;
    nlohmann::json to_json() const;
};

// Executes the configured pipeline, writes report.json, summary.txt,
// the experiment CSVs and the config echo into the resolved output
// directory. Throws ConfigError / IoError; gate failures are carried in
// the report, not thrown.
RunReport run(const ExperimentConfig& config);

// Pretty-print a previously written run directory (report.json).
std::string format_run_dir(const std::string& run_dir);

// Oracle suites for the CLI `selftest` subcommand; prints one line per
// check, returns true when everything passes.
bool selftest(std::uint64_t seed);

}  // namespace projlab::experiments
