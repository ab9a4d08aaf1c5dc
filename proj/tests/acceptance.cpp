// Acceptance suite: executes every acceptance criterion at its stated
// tolerance and prints one pass/fail line per criterion. Exit status is
// the number of failed criteria.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "projlab/experiments.hpp"
#include "projlab/rng.hpp"
#include "projlab/rs_algebra.hpp"

using namespace projlab;
namespace fs = std::filesystem;

namespace {

int g_threads = 4;
int g_failures = 0;

void report_criterion(int id, const std::string& name, bool pass, const std::string& detail,
                      double seconds) {
    std::ostringstream line;
    line << (pass ? "[PASS] " : "[FAIL] ") << "criterion-" << id << " " << name << " ("
         << detail << ") [" << static_cast<int>(seconds * 10.0) / 10.0 << "s]";
    std::cout << line.str() << std::endl;
    if (!pass) ++g_failures;
}

class Timer {
  public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

// Failing sub-checks whose names start with one of the prefixes
// (all checks when the prefix list is empty).
std::string failing_checks(const experiments::RunReport& report,
                           const std::vector<std::string>& prefixes = {}) {
    std::ostringstream out;
    for (const auto& check : report.checks) {
        bool relevant = prefixes.empty();
        for (const auto& prefix : prefixes) {
            if (check.name.rfind(prefix, 0) == 0) relevant = true;
        }
        if (relevant && !check.pass) {
            out << " " << check.name << "=" << experiments::fmt17(check.value);
        }
    }
    return out.str();
}

bool checks_pass(const experiments::RunReport& report,
                 const std::vector<std::string>& prefixes = {}) {
    for (const auto& check : report.checks) {
        bool relevant = prefixes.empty();
        for (const auto& prefix : prefixes) {
            if (check.name.rfind(prefix, 0) == 0) relevant = true;
        }
        if (relevant && !check.pass) return false;
    }
    return true;
}

double check_value(const experiments::RunReport& report, const std::string& name) {
    for (const auto& check : report.checks) {
        if (check.name == name) return check.value;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

fs::path out_root() {
    const auto dir = fs::temp_directory_path() / "projlab_acceptance";
    fs::create_directories(dir);
    return dir;
}

// --- criterion 1: replica-symmetric algebra ----------------------------

void criterion_1() {
    Timer timer;
    Rng rng(910010);
    double worst_inv = 0.0, worst_eig = 0.0, worst_op = 0.0;
    int instances = 0;
    while (instances < 200) {
        const int m = 2 + static_cast<int>(rng.uniform_index(15));
        const double rho = rng.uniform(0.3, 3.0);
        const double q = rng.uniform(-rho / (m - 1) * 0.95, rho * 0.95);
        const auto r = rs::rs_build(m, rho, q);
        if (!rs::positive_definite(r)) continue;
        ++instances;
        const Eigen::MatrixXd dense = rs::densify(r);
        worst_inv = std::max(worst_inv, (rs::densify(rs::rs_inverse(r)) * dense -
                                         Eigen::MatrixXd::Identity(m, m))
                                            .cwiseAbs()
                                            .maxCoeff());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
        const auto ev = rs::rs_eigvals(r);
        const double lo = std::min(ev.top, ev.rest);
        const double hi = std::max(ev.top, ev.rest);
        worst_eig = std::max(worst_eig, std::abs(es.eigenvalues().minCoeff() - lo));
        worst_eig = std::max(worst_eig, std::abs(es.eigenvalues().maxCoeff() - hi));
    }
    for (int p = 1; p <= 3; ++p) {
        for (int k = 1; k <= 3; ++k) {
            for (const auto& [rho, q] : std::vector<std::pair<double, double>>{
                     {1.0, 0.75}, {2.0, 1.0}, {1.5, 0.0}}) {
                const rs::KronCovariance sigma{rs::rs_build(2 * p, rho, q), k};
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rs::densify(sigma));
                // Operator norm of the dense inverse square root.
                const double numeric = 1.0 / std::sqrt(es.eigenvalues().minCoeff());
                worst_op = std::max(worst_op,
                                    std::abs(numeric - rs::sigma_inv_sqrt_opnorm(rho, q)));
            }
        }
    }
    const bool pass = worst_inv <= 1e-12 && worst_eig <= 1e-12 && worst_op <= 1e-10;
    std::ostringstream detail;
    detail << "200 instances: inverse " << experiments::fmt17(worst_inv)
           << " <= 1e-12, eigvals " << experiments::fmt17(worst_eig) << " <= 1e-12, opnorm "
           << experiments::fmt17(worst_op) << " <= 1e-10";
    report_criterion(1, "replica-symmetric algebra", pass, detail.str(), timer.seconds());
}

// --- criteria 2 and 3: Haar moments and exchangeable-pair drift --------

void criteria_2_3() {
    Timer timer;
    experiments::ExperimentConfig cfg;
    cfg.kind = "haar-moments";
    cfg.seed = 910023;
    cfg.threads = g_threads;
    cfg.haar_orders = {4, 6, 10};
    cfg.haar_draws = 1000000;
    cfg.drift_n = 20;
    cfg.drift_epsilon = 0.02;
    cfg.drift_samples = 200000;
    cfg.out_dir = (out_root() / "haar").string();
    const auto report = experiments::run(cfg);
    const double t = timer.seconds();

    bool moments_pass = true;
    int n_checks = 0;
    for (const auto& check : report.checks) {
        if (check.name.rfind("drift", 0) == 0) continue;
        ++n_checks;
        moments_pass = moments_pass && check.pass;
    }
    std::ostringstream d2;
    d2 << n_checks << " moment z-scores within 4 SE over 1e6 draws, n in {4,6,10}"
       << failing_checks(report, {"n4-", "n6-", "n10-"});
    report_criterion(2, "Haar moment suite", moments_pass, d2.str(), t);

    const double max_z = check_value(report, "drift-max-z");
    report_criterion(3, "exchangeable-pair drift", checks_pass(report, {"drift"}),
                     "max |z| = " + experiments::fmt17(max_z) + " <= 5 at eps=0.02, 2e5 draws",
                     0.0);
}

// --- criterion 4: metrics self-test -------------------------------------

void criterion_4() {
    Timer timer;
    experiments::ExperimentConfig cfg;
    cfg.kind = "metrics-selftest";
    cfg.seed = 910004;
    cfg.threads = g_threads;
    cfg.selftest_instances = 50;
    cfg.quotient_trials = 10000;
    cfg.out_dir = (out_root() / "metrics").string();
    const auto report = experiments::run(cfg);
    report_criterion(4, "metrics self-test", report.all_pass(),
                     "LP oracle 1e-12, translation 1e-10, marginal monotonicity, "
                     "Lipschitz products r<=4" +
                         failing_checks(report),
                     timer.seconds());
}

// --- criteria 5 and 6: decay order and upper-bound consistency ---------

void criteria_5_6() {
    Timer timer;
    experiments::ExperimentConfig cfg;
    cfg.kind = "theorem-scaling";
    cfg.seed = 910056;
    cfg.threads = g_threads;
    cfg.source.kind = "subgaussian-product";
    cfg.source.rho = 1.0;
    cfg.source.q = 0.25;
    cfg.source.base = "gaussian";
    cfg.n_list = {64, 128, 256, 512, 1024};
    cfg.k = 2;
    cfg.p = 1;
    cfg.variant = "full";
    cfg.catalog_size = 16;
    cfg.outer_draws = 256;
    cfg.inner_replicas = 4096;
    cfg.w1_bound_check = true;
    cfg.w1_cloud = 512;
    cfg.w1_reps = 8;
    cfg.n_pairs = 4000;
    cfg.out_dir = (out_root() / "scaling").string();
    const auto report = experiments::run(cfg);
    const double t = timer.seconds();

    const double slope = check_value(report, "scaling-slope");
    report_criterion(5, "projection-moment decay order", checks_pass(report, {"scaling-"}),
                     "log-log slope " + experiments::fmt17(slope) +
                         " <= -0.4, per-N sup monotone within 2 SE",
                     t);
    report_criterion(6, "upper-bound consistency", checks_pass(report, {"w1-bound-"}),
                     "W1(P_N, Q) within the 32 p^2 k rate bound at every N" +
                         failing_checks(report, {"w1-bound-"}),
                     0.0);
}

// --- criterion 7: SK cavity fields --------------------------------------

void criterion_7() {
    Timer timer;
    experiments::ExperimentConfig cfg;
    cfg.kind = "sk-cavity";
    cfg.seed = 910007;
    cfg.threads = g_threads;
    cfg.source.kind = "sk-glauber";
    cfg.source.beta = 0.3;
    cfg.source.h = 0.3;
    cfg.source.burnin = 200;
    cfg.source.thin = 10;
    cfg.n_list = {64, 128, 256};
    cfg.n_disorders = 32;
    cfg.pairs_per_disorder = 200;
    cfg.cloud_size = 512;
    cfg.out_dir = (out_root() / "sk").string();
    const auto report = experiments::run(cfg);
    std::ostringstream detail;
    detail << "c1 == 0 exactly, N*c2 ratio "
           << experiments::fmt17(check_value(report, "n-c2-bounded"))
           << " <= 3, cavity W1 decreasing, fixed point vs bisection 1e-10"
           << failing_checks(report);
    report_criterion(7, "SK cavity fields", report.all_pass(), detail.str(), timer.seconds());
}

// --- criterion 8: converse identities ------------------------------------

void criterion_8() {
    Timer timer;
    experiments::ExperimentConfig cfg;
    cfg.kind = "converse";
    cfg.seed = 910008;
    cfg.threads = g_threads;
    cfg.source.kind = "isotropic-gaussian";
    cfg.n_list = {50, 200, 800};
    cfg.n_pairs = 100000;
    cfg.n_samples = 100000;
    cfg.lambdas = {0.5, 1.0, 2.0};
    cfg.wrong_q_delta = 0.5;
    cfg.out_dir = (out_root() / "converse").string();
    const auto report = experiments::run(cfg);
    report_criterion(8, "converse identities", report.all_pass(),
                     "cosh decreasing + 4 SE Taylor oracle at N=800, chi-square Laplace "
                     "gaps, wrong-q probe" +
                         failing_checks(report),
                     timer.seconds());
}

// --- criterion 9: reproducibility ---------------------------------------

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

bool csv_dirs_identical(const fs::path& a, const fs::path& b, std::string& mismatch) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(a)) {
        if (entry.path().extension() == ".csv") names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) {
        mismatch = "no CSV files";
        return false;
    }
    for (const auto& name : names) {
        if (read_bytes(a / name) != read_bytes(b / name)) {
            mismatch = name;
            return false;
        }
    }
    return true;
}

void criterion_9() {
    Timer timer;
    bool pass = true;
    std::string detail;

    // Scaled-down instances of three acceptance experiments, rerun at
    // thread counts 1 and 4 with the identical config and master seed.
    std::vector<experiments::ExperimentConfig> configs;
    {
        experiments::ExperimentConfig cfg;
        cfg.kind = "theorem-scaling";
        cfg.seed = 910009;
        cfg.source.kind = "subgaussian-product";
        cfg.source.rho = 1.0;
        cfg.source.q = 0.25;
        cfg.n_list = {32, 64, 96};
        cfg.outer_draws = 32;
        cfg.inner_replicas = 64;
        cfg.w1_cloud = 64;
        cfg.w1_reps = 4;
        cfg.n_pairs = 500;
        configs.push_back(cfg);
    }
    {
        experiments::ExperimentConfig cfg;
        cfg.kind = "haar-moments";
        cfg.seed = 910010;
        cfg.haar_orders = {4, 6};
        cfg.haar_draws = 50000;
        cfg.drift_n = 10;
        cfg.drift_samples = 20000;
        configs.push_back(cfg);
    }
    {
        experiments::ExperimentConfig cfg;
        cfg.kind = "sk-cavity";
        cfg.seed = 910011;
        cfg.source.kind = "sk-glauber";
        cfg.source.burnin = 50;
        cfg.source.thin = 4;
        cfg.n_list = {24, 48};
        cfg.n_disorders = 8;
        cfg.pairs_per_disorder = 50;
        cfg.cloud_size = 128;
        configs.push_back(cfg);
    }

    for (auto& cfg : configs) {
        const auto dir1 = out_root() / ("repro-" + cfg.kind + "-t1");
        const auto dir4 = out_root() / ("repro-" + cfg.kind + "-t4");
        fs::remove_all(dir1);
        fs::remove_all(dir4);
        cfg.threads = 1;
        cfg.out_dir = dir1.string();
        experiments::run(cfg);
        cfg.threads = 4;
        cfg.out_dir = dir4.string();
        experiments::run(cfg);
        std::string mismatch;
        if (!csv_dirs_identical(dir1, dir4, mismatch)) {
            pass = false;
            detail += " " + cfg.kind + ":" + mismatch;
        }
    }
    report_criterion(9, "reproducibility", pass,
                     "byte-identical CSV outputs at thread counts 1 and 4" + detail,
                     timer.seconds());
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* env = std::getenv("PROJLAB_ACCEPT_THREADS")) g_threads = std::atoi(env);
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--threads" && i + 1 < argc) {
            g_threads = std::atoi(argv[i + 1]);
        }
    }
    if (g_threads < 1) g_threads = 1;

    Timer total;
    std::cout << "projlab acceptance suite (threads " << g_threads << ")\n";
    criterion_1();
    criteria_2_3();
    criterion_4();
    criteria_5_6();
    criterion_7();
    criterion_8();
    criterion_9();
    std::cout << (g_failures == 0 ? std::string("ACCEPTANCE: all criteria passed")
                                  : "ACCEPTANCE: " + std::to_string(g_failures) +
                                        " criterion/criteria FAILED")
              << " [" << static_cast<int>(total.seconds()) << "s total]\n";
    return g_failures;
}
