#include "projlab/experiments.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "projlab/haar.hpp"
#include "projlab/metrics.hpp"
#include "projlab/parallel.hpp"
#include "projlab/projection.hpp"
#include "projlab/rs_algebra.hpp"
#include "projlab/stats.hpp"
#include "projlab/verify.hpp"

namespace projlab::experiments {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::string fnv1a64_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct CsvTable {
    std::string name;
    std::string header;
    std::vector<std::string> rows;
};

struct RunContext {
    const ExperimentConfig* cfg = nullptr;
    std::vector<CheckResult> checks;
    std::vector<CsvTable> tables;
    // Extra files written directly by a pipeline (binary artifacts).
    std::vector<std::string> extra_artifacts;
    nlohmann::json data = nlohmann::json::object();
    std::string out_dir;  // empty during selftest

    void check(const std::string& name, bool pass, double value, double gate,
               const std::string& detail = "") {
        checks.push_back({name, pass, value, gate, detail});
    }
};

json concentration_to_json(const verify::ConcentrationReport& r) {
    return json{{"n_dim", r.n_dim},
                {"n_pairs", r.n_pairs},
                {"rho_target", r.rho_target},
                {"q_target", r.q_target},
                {"rho_declared", r.rho_declared},
                {"q_declared", r.q_declared},
                {"rho_hat", r.rho_hat},
                {"q_hat", r.q_hat},
                {"c1_hat", r.c1_hat},
                {"c2_hat", r.c2_hat},
                {"d1", r.d1},
                {"d2", r.d2},
                {"se_rho", r.se_rho},
                {"se_q", r.se_q},
                {"se_c1", r.se_c1},
                {"se_c2", r.se_c2}};
}

json estimate_to_json(const verify::TheoremLhsEstimate& e, int n_dim) {
    return json{{"n_dim", n_dim},
                {"variant", e.variant == verify::LhsVariant::partial ? "partial" : "full"},
                {"p", e.p},
                {"k", e.k},
                {"g_id", e.g_id},
                {"value", e.value},
                {"se", e.se},
                {"outer_draws", e.outer_draws},
                {"inner_replicas", e.inner_replicas}};
}

// --- config parsing helpers -------------------------------------------

void require_known_keys(const json& j, std::initializer_list<const char*> allowed,
                        const std::string& path) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError(path + "." + it.key() + ": unknown field");
    }
}

template <typename T>
void load_field(const json& j, const char* key, T& out, const std::string& path) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + "." + key + ": wrong type");
    }
}

}  // namespace

// --- SourceSpec --------------------------------------------------------

json SourceSpec::to_json() const {
    json j;
    j["kind"] = kind;
    j["n"] = n;
    j["rho"] = rho;
    j["q"] = q;
    j["base"] = base;
    j["spike_sqrt_n"] = spike_sqrt_n;
    j["mean_coordinate"] = mean_coordinate;
    j["beta"] = beta;
    j["h"] = h;
    j["burnin"] = burnin;
    j["thin"] = thin;
    j["disorder_seed"] = disorder_seed;
    return j;
}

SourceSpec SourceSpec::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("source: must be an object");
    require_known_keys(j,
                       {"kind", "n", "rho", "q", "base", "spike_sqrt_n", "mean_coordinate",
                        "beta", "h", "burnin", "thin", "disorder_seed"},
                       "source");
    SourceSpec s;
    load_field(j, "kind", s.kind, "source");
    load_field(j, "n", s.n, "source");
    load_field(j, "rho", s.rho, "source");
    load_field(j, "q", s.q, "source");
    load_field(j, "base", s.base, "source");
    load_field(j, "spike_sqrt_n", s.spike_sqrt_n, "source");
    load_field(j, "mean_coordinate", s.mean_coordinate, "source");
    load_field(j, "beta", s.beta, "source");
    load_field(j, "h", s.h, "source");
    load_field(j, "burnin", s.burnin, "source");
    load_field(j, "thin", s.thin, "source");
    load_field(j, "disorder_seed", s.disorder_seed, "source");
    const bool known = s.kind == "subgaussian-product" || s.kind == "isotropic-gaussian" ||
                       s.kind == "spiked-gaussian" || s.kind == "sk-glauber";
    if (!known) throw ConfigError("source.kind: unknown source kind '" + s.kind + "'");
    return s;
}

std::unique_ptr<sources::VectorSource> SourceSpec::make(int n_dim) const {
    const int dim = n_dim > 0 ? n_dim : n;
    if (kind == "subgaussian-product") {
        sources::ProductBase pb;
        if (base == "gaussian") {
            pb = sources::ProductBase::gaussian;
        } else if (base == "rademacher-shifted") {
            pb = sources::ProductBase::rademacher_shifted;
        } else if (base == "uniform-shifted") {
            pb = sources::ProductBase::uniform_shifted;
        } else {
            throw ConfigError("source.base: unknown base '" + base + "'");
        }
        return sources::subgaussian_product(dim, rho, q, pb);
    }
    if (kind == "isotropic-gaussian") {
        return sources::spiked_gaussian(std::vector<double>(dim, 1.0),
                                        std::vector<double>(dim, 0.0));
    }
    if (kind == "spiked-gaussian") {
        std::vector<double> spectrum(dim, 1.0);
        if (spike_sqrt_n) spectrum[0] = std::sqrt(static_cast<double>(dim));
        return sources::spiked_gaussian(std::move(spectrum),
                                        std::vector<double>(dim, mean_coordinate));
    }
    if (kind == "sk-glauber") {
        auto model = sources::make_sk_model(dim, beta, h, disorder_seed);
        return std::make_unique<sources::SkGlauberSource>(std::move(model), burnin, thin);
    }
    throw ConfigError("source.kind: unknown source kind '" + kind + "'");
}

// --- ExperimentConfig ---------------------------------------------------

json ExperimentConfig::to_json() const {
    json j;
    j["schema_version"] = schema_version;
    j["kind"] = kind;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["threads"] = threads;
    j["profile"] = profile;
    j["source"] = source.to_json();
    j["n_list"] = n_list;
    j["k"] = k;
    j["p"] = p;
    j["variant"] = variant;
    j["catalog_size"] = catalog_size;
    j["catalog_seed"] = catalog_seed;
    j["lip"] = lip;
    j["sup_bound"] = sup_bound;
    j["outer_draws"] = outer_draws;
    j["inner_replicas"] = inner_replicas;
    j["w1_bound_check"] = w1_bound_check;
    j["w1_cloud"] = w1_cloud;
    j["w1_reps"] = w1_reps;
    j["n_pairs"] = n_pairs;
    j["n_samples"] = n_samples;
    j["lambdas"] = lambdas;
    j["wrong_q_delta"] = wrong_q_delta;
    j["haar_orders"] = haar_orders;
    j["haar_draws"] = haar_draws;
    j["drift_n"] = drift_n;
    j["drift_epsilon"] = drift_epsilon;
    j["drift_samples"] = drift_samples;
    j["n_disorders"] = n_disorders;
    j["pairs_per_disorder"] = pairs_per_disorder;
    j["cloud_size"] = cloud_size;
    j["selftest_instances"] = selftest_instances;
    j["quotient_trials"] = quotient_trials;
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: must be a JSON object");
    require_known_keys(
        j, {"schema_version", "kind",          "seed",         "out_dir",
            "threads",        "profile",       "source",       "n_list",
            "k",              "p",             "variant",      "catalog_size",
            "catalog_seed",   "lip",           "sup_bound",    "outer_draws",
            "inner_replicas", "w1_bound_check", "w1_cloud",    "w1_reps",
            "n_pairs",        "n_samples",     "lambdas",      "wrong_q_delta",
            "haar_orders",    "haar_draws",    "drift_n",      "drift_epsilon",
            "drift_samples",  "n_disorders",   "pairs_per_disorder", "cloud_size",
            "selftest_instances", "quotient_trials"},
        "config");
    ExperimentConfig c;
    load_field(j, "schema_version", c.schema_version, "config");
    if (c.schema_version != 1) throw ConfigError("config.schema_version: unsupported version");
    if (!j.contains("kind")) throw ConfigError("config.kind: required");
    load_field(j, "kind", c.kind, "config");
    const bool kind_ok = c.kind == "concentration" || c.kind == "theorem-scaling" ||
                         c.kind == "sk-cavity" || c.kind == "converse" ||
                         c.kind == "haar-moments" || c.kind == "metrics-selftest";
    if (!kind_ok) throw ConfigError("config.kind: unknown experiment kind '" + c.kind + "'");
    if (!j.contains("seed")) throw ConfigError("config.seed: required (master seed)");
    load_field(j, "seed", c.seed, "config");
    load_field(j, "out_dir", c.out_dir, "config");
    load_field(j, "threads", c.threads, "config");
    load_field(j, "profile", c.profile, "config");
    if (c.profile != "quick" && c.profile != "full") {
        throw ConfigError("config.profile: must be 'quick' or 'full'");
    }
    if (j.contains("source")) c.source = SourceSpec::from_json(j.at("source"));
    load_field(j, "n_list", c.n_list, "config");
    load_field(j, "k", c.k, "config");
    load_field(j, "p", c.p, "config");
    load_field(j, "variant", c.variant, "config");
    if (c.variant != "partial" && c.variant != "full") {
        throw ConfigError("config.variant: must be 'partial' or 'full'");
    }
    load_field(j, "catalog_size", c.catalog_size, "config");
    load_field(j, "catalog_seed", c.catalog_seed, "config");
    load_field(j, "lip", c.lip, "config");
    load_field(j, "sup_bound", c.sup_bound, "config");
    load_field(j, "outer_draws", c.outer_draws, "config");
    load_field(j, "inner_replicas", c.inner_replicas, "config");
    load_field(j, "w1_bound_check", c.w1_bound_check, "config");
    load_field(j, "w1_cloud", c.w1_cloud, "config");
    load_field(j, "w1_reps", c.w1_reps, "config");
    load_field(j, "n_pairs", c.n_pairs, "config");
    load_field(j, "n_samples", c.n_samples, "config");
    load_field(j, "lambdas", c.lambdas, "config");
    load_field(j, "wrong_q_delta", c.wrong_q_delta, "config");
    load_field(j, "haar_orders", c.haar_orders, "config");
    load_field(j, "haar_draws", c.haar_draws, "config");
    load_field(j, "drift_n", c.drift_n, "config");
    load_field(j, "drift_epsilon", c.drift_epsilon, "config");
    load_field(j, "drift_samples", c.drift_samples, "config");
    load_field(j, "n_disorders", c.n_disorders, "config");
    load_field(j, "pairs_per_disorder", c.pairs_per_disorder, "config");
    load_field(j, "cloud_size", c.cloud_size, "config");
    load_field(j, "selftest_instances", c.selftest_instances, "config");
    load_field(j, "quotient_trials", c.quotient_trials, "config");
    if (c.threads < 1) throw ConfigError("config.threads: must be >= 1");
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return from_json(j);
}

std::string ExperimentConfig::digest() const { return fnv1a64_hex(to_json().dump()); }

std::string ExperimentConfig::resolve_out_dir() const {
    if (!out_dir.empty()) return out_dir;
    std::string parent = "runs";
    if (const char* env = std::getenv("PROJLAB_OUT_DIR"); env != nullptr && env[0] != '\0') {
        parent = env;
    }
    return parent + "/" + kind + "-seed" + std::to_string(seed);
}

// --- RunReport -----------------------------------------------------------

bool RunReport::all_pass() const {
    for (const auto& c : checks) {
        if (!c.pass) return false;
    }
    return true;
}

json RunReport::to_json() const {
    json j;
    j["config"] = config_echo;
    j["config_digest"] = config_digest;
    j["versions"] = {{"project", "projlab 0.1.0"}, {"schema", 1}};
    j["wall_time_s"] = wall_time_s;
    j["all_pass"] = all_pass();
    json checks_json = json::array();
    for (const auto& c : checks) {
        checks_json.push_back({{"name", c.name},
                               {"pass", c.pass},
                               {"value", c.value},
                               {"gate", c.gate},
                               {"detail", c.detail}});
    }
    j["checks"] = checks_json;
    j["artifacts"] = artifacts;
    j["data"] = data;
    return j;
}

// =======================================================================
// Experiment pipelines
// =======================================================================

namespace {

std::vector<int> default_n_list(const ExperimentConfig& cfg) {
    if (!cfg.n_list.empty()) return cfg.n_list;
    if (cfg.kind == "theorem-scaling") return {64, 128, 256, 512, 1024};
    if (cfg.kind == "sk-cavity") return {64, 128, 256};
    if (cfg.kind == "converse") return {50, 200, 800};
    return {cfg.source.n};
}

// Scale factor applied to sampling budgets in the long-running profile.
int profile_scale(const ExperimentConfig& cfg) { return cfg.profile == "full" ? 4 : 1; }

// --- concentration -----------------------------------------------------

void run_concentration(RunContext& ctx) {
    const auto& cfg = *ctx.cfg;
    const auto n_list = default_n_list(cfg);
    const std::int64_t n_pairs = cfg.n_pairs * profile_scale(cfg);

    CsvTable table;
    table.name = "concentration.csv";
    table.header =
        "N,n_pairs,rho_target,q_target,rho_hat,q_hat,c1_hat,c2_hat,d1,d2,se_rho,se_q,se_c1,se_c2";

    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        const int n_dim = n_list[ni];
        auto source = cfg.source.make(n_dim);
        const double rho_t = source->rho();
        const double q_t = source->q();
        const auto report = verify::concentration_report(
            *source, n_pairs, derive_seed(cfg.seed, {{"concentration", static_cast<std::uint64_t>(n_dim)}}),
            rho_t, q_t);

        ctx.data["concentration"].push_back(concentration_to_json(report));
        std::ostringstream row;
        row << n_dim << ',' << n_pairs << ',' << fmt17(rho_t) << ',' << fmt17(q_t) << ','
            << fmt17(report.rho_hat) << ',' << fmt17(report.q_hat) << ','
            << fmt17(report.c1_hat) << ',' << fmt17(report.c2_hat) << ',' << fmt17(report.d1)
            << ',' << fmt17(report.d2) << ',' << fmt17(report.se_rho) << ','
            << fmt17(report.se_q) << ',' << fmt17(report.se_c1) << ',' << fmt17(report.se_c2);
        table.rows.push_back(row.str());

        const std::string suffix = "-N" + std::to_string(n_dim);
        ctx.check("rho-agrees" + suffix,
                  std::abs(report.rho_hat - rho_t) <= 4.0 * report.se_rho + 1e-15,
                  report.rho_hat - rho_t, 4.0 * report.se_rho, "thin-shell first moment");
        ctx.check("q-agrees" + suffix,
                  std::abs(report.q_hat - q_t) <= 4.0 * report.se_q + 1e-15,
                  report.q_hat - q_t, 4.0 * report.se_q, "overlap first moment");
        if (cfg.source.kind == "sk-glauber") {
            ctx.check("c1-exact-zero" + suffix, report.c1_hat == 0.0, report.c1_hat, 0.0,
                      "|x|^2/N is identically 1 on the hypercube");
        } else {
            // Covariance-eigenvalue bound on the overlap variance.
            double lambda_sq_sum = 0.0, lambda_max = 0.0;
            if (cfg.source.kind == "subgaussian-product") {
                const double lam = cfg.source.rho - cfg.source.q;
                lambda_sq_sum = n_dim * lam * lam;
                lambda_max = lam;
            } else if (cfg.source.kind == "isotropic-gaussian") {
                lambda_sq_sum = n_dim;
                lambda_max = 1.0;
            } else {
                const double spike = cfg.source.spike_sqrt_n
                                         ? std::sqrt(static_cast<double>(n_dim))
                                         : 1.0;
                lambda_sq_sum = spike * spike + (n_dim - 1);
                lambda_max = std::max(1.0, spike);
            }
            const double nd = static_cast<double>(n_dim);
            const double bound = lambda_sq_sum / (nd * nd) + 2.0 / nd * lambda_max * q_t;
            ctx.check("overlap-cov-bound" + suffix,
                      report.c2_hat <= bound + 4.0 * report.se_c2, report.c2_hat, bound,
                      "c2 <= |lambda|^2/N^2 + (2/N) max(lambda) q + 4 SE");
        }
    }
    ctx.tables.push_back(std::move(table));
}

// --- theorem-scaling ----------------------------------------------------

void run_theorem_scaling(RunContext& ctx) {
    const auto& cfg = *ctx.cfg;
    const auto n_list = default_n_list(cfg);
    const std::int64_t outer = cfg.outer_draws * profile_scale(cfg);
    const double slope_gate = cfg.profile == "full" ? -0.45 : -0.4;

    const auto catalog =
        metrics::make_catalog(cfg.k, cfg.lip, cfg.sup_bound, cfg.catalog_size, cfg.catalog_seed);
    const verify::SourceFamily family = [&cfg](int n_dim) { return cfg.source.make(n_dim); };
    const auto variant =
        cfg.variant == "partial" ? verify::LhsVariant::partial : verify::LhsVariant::full;

    const auto report = verify::scaling_check(family, n_list, catalog, variant, cfg.p, outer,
                                              cfg.inner_replicas,
                                              derive_seed(cfg.seed, {{"scaling-run", 0}}),
                                              cfg.threads);

    CsvTable members;
    members.name = "scaling_members.csv";
    members.header = "N,g_id,value,se";
    for (std::size_t ni = 0; ni < report.per_member.size(); ++ni) {
        for (const auto& est : report.per_member[ni]) {
            ctx.data["estimates"].push_back(estimate_to_json(est, n_list[ni]));
            std::ostringstream row;
            row << n_list[ni] << ',' << est.g_id << ',' << fmt17(est.value) << ','
                << fmt17(est.se);
            members.rows.push_back(row.str());
        }
    }
    ctx.tables.push_back(std::move(members));

    CsvTable sup;
    sup.name = "scaling_sup.csv";
    sup.header = "N,estimate,se,g_id";
    for (const auto& pt : report.points) {
        std::ostringstream row;
        row << pt.n_dim << ',' << fmt17(pt.estimate) << ',' << fmt17(pt.se) << ',' << pt.g_id;
        sup.rows.push_back(row.str());
    }
    ctx.tables.push_back(std::move(sup));

    ctx.data["slope"] = report.slope;
    const bool slope_ok = std::isfinite(report.slope) && report.slope <= slope_gate;
    ctx.check("scaling-slope", slope_ok, report.slope, slope_gate,
              "log-log slope of the sup estimate over the catalog");
    ctx.check("scaling-monotone-2se", report.monotone_within_2se, report.monotone_within_2se,
              1.0, "per-N sup estimates nonincreasing up to 2 SE");

    if (!cfg.w1_bound_check) return;

    // Annealed-cloud W1 against the closed-form joint-law bound, in its
    // 2-replica one-dimensional instance.
    CsvTable w1t;
    w1t.name = "w1_bound.csv";
    w1t.header = "N,w1_mean,w1_se,bound,c1_hat,c2_hat,d1,d2";
    const int reps = cfg.w1_reps;
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        const int n_dim = n_list[ni];
        auto source = family(n_dim);
        const double rho = source->rho();
        const double q = source->q();
        const auto conc = verify::concentration_report(
            *source, cfg.n_pairs * profile_scale(cfg),
            derive_seed(cfg.seed, {{"w1-conc", static_cast<std::uint64_t>(n_dim)}}), rho, q);
        ctx.data["w1_bound_concentration"].push_back(concentration_to_json(conc));
        const double bound =
            32.0 / std::sqrt(rho - q) / (n_dim - 1.0) * (conc.d1 + conc.d2);

        std::vector<double> w1_values(reps);
        parallel_for(static_cast<std::size_t>(reps), cfg.threads, [&](std::size_t r) {
            Rng rng(derive_seed(cfg.seed, {{"w1-cloud", static_cast<std::uint64_t>(n_dim)},
                                           {"rep", r}}));
            metrics::Cloud pn_cloud, q_cloud;
            pn_cloud.n = cfg.w1_cloud;
            pn_cloud.k = 2;
            q_cloud.n = cfg.w1_cloud;
            q_cloud.k = 2;
            pn_cloud.data.reserve(2 * cfg.w1_cloud);
            q_cloud.data.reserve(2 * cfg.w1_cloud);
            for (int s = 0; s < cfg.w1_cloud; ++s) {
                const auto pn = projection::sample_pn(*source, 1, 1, rng);
                pn_cloud.data.insert(pn_cloud.data.end(), pn.values.begin(), pn.values.end());
                const auto qs = projection::sample_q(rho, q, 1, 1, rng);
                q_cloud.data.insert(q_cloud.data.end(), qs.values.begin(), qs.values.end());
            }
            w1_values[r] = metrics::w1_exact_kd(pn_cloud, q_cloud);
        });
        const double w1_mean = mean(w1_values);
        const double w1_se = standard_error(w1_values);
        std::ostringstream row;
        row << n_dim << ',' << fmt17(w1_mean) << ',' << fmt17(w1_se) << ',' << fmt17(bound)
            << ',' << fmt17(conc.c1_hat) << ',' << fmt17(conc.c2_hat) << ',' << fmt17(conc.d1)
            << ',' << fmt17(conc.d2);
        w1t.rows.push_back(row.str());
        ctx.check("w1-bound-N" + std::to_string(n_dim), w1_mean <= bound + 4.0 * w1_se,
                  w1_mean, bound, "measured W1(P_N, Q) within the joint-law rate bound");
    }
    ctx.tables.push_back(std::move(w1t));
}

// --- sk-cavity ----------------------------------------------------------

// Independent root-finder for the overlap fixed point, used as an oracle
// against the damped iteration.
double sk_fixed_point_bisect(double beta, double h) {
    const auto f = [&](double q) {
        const double bq = beta * std::sqrt(q);
        return sources::gauss_hermite_expect([&](double z) {
                   const double t = std::tanh(bq * z + h);
                   return t * t;
               }) - q;
    };
    double lo = 0.0, hi = 1.0;
    const double flo = f(lo);
    if (flo == 0.0) return 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

void run_sk_cavity(RunContext& ctx) {
    const auto& cfg = *ctx.cfg;
    if (cfg.source.kind != "sk-glauber") {
        throw ConfigError("config.source.kind: sk-cavity requires an sk-glauber source");
    }
    const auto n_list = default_n_list(cfg);
    const double beta = cfg.source.beta;
    const double h = cfg.source.h;
    const std::int64_t pairs = cfg.pairs_per_disorder * profile_scale(cfg);
    const int n_disorders = cfg.n_disorders;
    const int cloud_size = cfg.cloud_size;

    const double q_star = sources::sk_fixed_point(beta, h);
    const double q_bis = sk_fixed_point_bisect(beta, h);
    ctx.check("fixed-point-bisection", std::abs(q_star - q_bis) <= 1e-10,
              std::abs(q_star - q_bis), 1e-10, "damped iteration vs bisection oracle");

    struct Item {
        double c1 = 0.0;
        double c2 = 0.0;
        double q_hat = 0.0;
        double w1 = 0.0;
    };
    std::vector<Item> items(n_list.size() * n_disorders);

    parallel_for(items.size(), cfg.threads, [&](std::size_t idx) {
        const std::size_t ni = idx / n_disorders;
        const std::uint64_t d = idx % n_disorders;
        const int n_dim = n_list[ni];
        const double nd = static_cast<double>(n_dim);
        auto model = sources::make_sk_model(
            n_dim, beta, h,
            derive_seed(cfg.seed, {{"sk-disorder", static_cast<std::uint64_t>(n_dim)}, {"d", d}}));
        sources::SkGlauberSource source(std::move(model), cfg.source.burnin, cfg.source.thin);
        auto stream = source.make_pair_stream(
            derive_seed(cfg.seed, {{"sk-pairs", static_cast<std::uint64_t>(n_dim)}, {"d", d}}));

        const std::int64_t n_draw = std::max<std::int64_t>(pairs, (cloud_size + 1) / 2);
        std::vector<double> x1(n_dim), x2(n_dim);
        std::vector<double> overlaps;
        overlaps.reserve(pairs);
        double c1_acc = 0.0;
        std::vector<double> cavity;
        cavity.reserve(cloud_size);
        Rng theta_rng(
            derive_seed(cfg.seed, {{"sk-theta", static_cast<std::uint64_t>(n_dim)}, {"d", d}}));
        const double theta_sd = 1.0 / std::sqrt(nd);
        const auto cavity_sample = [&](const std::vector<double>& x) {
            double acc = 0.0;
            for (int i = 0; i < n_dim; ++i) acc += x[i] * theta_rng.normal();
            return theta_sd * acc;
        };
        for (std::int64_t t = 0; t < n_draw; ++t) {
            stream->next(x1, x2);
            if (t < pairs) {
                double s1 = 0.0, s2 = 0.0, ov = 0.0;
                for (int i = 0; i < n_dim; ++i) {
                    s1 += x1[i] * x1[i];
                    s2 += x2[i] * x2[i];
                    ov += x1[i] * x2[i];
                }
                s1 /= nd;
                s2 /= nd;
                const double d1 = s1 - 1.0;
                const double d2 = s2 - 1.0;
                c1_acc += d1 * d1 + d2 * d2;
                overlaps.push_back(ov / nd);
            }
            if (static_cast<int>(cavity.size()) < cloud_size) cavity.push_back(cavity_sample(x1));
            if (static_cast<int>(cavity.size()) < cloud_size) cavity.push_back(cavity_sample(x2));
        }

        Item item;
        item.c1 = c1_acc / static_cast<double>(2 * pairs);
        std::vector<double> dev(overlaps.size());
        for (std::size_t i = 0; i < overlaps.size(); ++i) {
            const double dq = overlaps[i] - q_star;
            dev[i] = dq * dq;
        }
        item.c2 = mean(dev);
        item.q_hat = mean(overlaps);

        // Reference mixture sqrt(q) z + sqrt(rho - q) xi, rho = 1.
        Rng mix_rng(
            derive_seed(cfg.seed, {{"sk-mixture", static_cast<std::uint64_t>(n_dim)}, {"d", d}}));
        std::vector<double> mixture(cloud_size);
        const double sq = std::sqrt(q_star);
        const double sr = std::sqrt(1.0 - q_star);
        for (auto& v : mixture) v = sq * mix_rng.normal() + sr * mix_rng.normal();
        item.w1 = metrics::w1_1d(cavity, mixture);
        items[idx] = item;
    });

    CsvTable per;
    per.name = "sk_cavity.csv";
    per.header = "N,disorder,c1_hat,c2_hat,q_hat,w1_cavity";
    for (std::size_t idx = 0; idx < items.size(); ++idx) {
        const std::size_t ni = idx / n_disorders;
        const std::size_t d = idx % n_disorders;
        std::ostringstream row;
        row << n_list[ni] << ',' << d << ',' << fmt17(items[idx].c1) << ','
            << fmt17(items[idx].c2) << ',' << fmt17(items[idx].q_hat) << ','
            << fmt17(items[idx].w1);
        per.rows.push_back(row.str());
    }
    ctx.tables.push_back(std::move(per));

    CsvTable summary;
    summary.name = "sk_summary.csv";
    summary.header = "N,q_star,c1_max,N_c2_mean,N_c2_se,w1_mean,w1_se";
    double c1_max = 0.0;
    std::vector<double> n_c2(n_list.size());
    std::vector<double> n_c2_se(n_list.size());
    std::vector<double> w1_mean(n_list.size());
    std::vector<double> w1_se(n_list.size());
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        std::vector<double> c2s(n_disorders), w1s(n_disorders);
        for (int d = 0; d < n_disorders; ++d) {
            const auto& item = items[ni * n_disorders + d];
            c1_max = std::max(c1_max, std::abs(item.c1));
            c2s[d] = item.c2;
            w1s[d] = item.w1;
        }
        const double nd = static_cast<double>(n_list[ni]);
        n_c2[ni] = nd * mean(c2s);
        n_c2_se[ni] = nd * standard_error(c2s);
        w1_mean[ni] = mean(w1s);
        w1_se[ni] = standard_error(w1s);
        std::ostringstream row;
        row << n_list[ni] << ',' << fmt17(q_star) << ',' << fmt17(c1_max) << ','
            << fmt17(n_c2[ni]) << ',' << fmt17(n_c2_se[ni]) << ',' << fmt17(w1_mean[ni]) << ','
            << fmt17(w1_se[ni]);
        summary.rows.push_back(row.str());
    }
    ctx.tables.push_back(std::move(summary));

    ctx.data["q_star"] = q_star;
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        ctx.data["sk_summary"].push_back(json{{"n_dim", n_list[ni]},
                                              {"n_c2_mean", n_c2[ni]},
                                              {"n_c2_se", n_c2_se[ni]},
                                              {"w1_mean", w1_mean[ni]},
                                              {"w1_se", w1_se[ni]}});
    }
    ctx.check("c1-exact-zero", c1_max == 0.0, c1_max, 0.0,
              "thin-shell statistic identically zero on the hypercube");
    const double ratio =
        *std::max_element(n_c2.begin(), n_c2.end()) / *std::min_element(n_c2.begin(), n_c2.end());
    ctx.check("n-c2-bounded", ratio <= 3.0, ratio, 3.0,
              "disorder-averaged N*c2 stays within a factor 3 across N");
    const std::size_t last = n_list.size() - 1;
    const double slack = 2.0 * std::sqrt(w1_se[0] * w1_se[0] + w1_se[last] * w1_se[last]);
    ctx.check("w1-cavity-decreasing", w1_mean[last] <= w1_mean[0] + slack,
              w1_mean[last] - w1_mean[0], slack,
              "cavity-cloud W1 from smallest to largest N");

    // Persist one disorder realization in the binary exchange format.
    if (!ctx.out_dir.empty()) {
        auto model = sources::make_sk_model(
            n_list[0], beta, h,
            derive_seed(cfg.seed, {{"sk-disorder", static_cast<std::uint64_t>(n_list[0])}, {"d", 0}}));
        const std::string path =
            ctx.out_dir + "/disorder_N" + std::to_string(n_list[0]) + "_d0.skdz";
        sources::save_disorder(path, model);
        const auto loaded = sources::load_disorder(path, beta, h);
        ctx.check("disorder-file-roundtrip",
                  loaded.couplings == model.couplings && loaded.n == model.n &&
                      loaded.disorder_seed == model.disorder_seed,
                  1.0, 1.0, "binary SKDZ round trip is exact");
        ctx.extra_artifacts.push_back(path);
    }
}

// --- converse -----------------------------------------------------------

void run_converse(RunContext& ctx) {
    const auto& cfg = *ctx.cfg;
    const bool isotropic = cfg.source.kind == "isotropic-gaussian";
    const bool sk = cfg.source.kind == "sk-glauber";
    if (!isotropic && !sk) {
        throw ConfigError("config.source.kind: converse requires isotropic-gaussian or sk-glauber");
    }
    const auto n_list = default_n_list(cfg);
    const std::int64_t n_pairs =
        std::min<std::int64_t>(cfg.n_pairs * profile_scale(cfg), 400000);
    const std::int64_t n_samples = cfg.n_samples * profile_scale(cfg);

    CsvTable cosh_table;
    cosh_table.name = "converse_cosh.csv";
    cosh_table.header = "N,q_target,value,se,taylor_oracle";
    std::vector<verify::ConverseCoshEstimate> cosh_points(n_list.size());
    std::vector<double> cosh_oracle(n_list.size());
    for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
        const int n_dim = n_list[ni];
        auto source = cfg.source.make(n_dim);
        const double q_t = source->q();
        cosh_points[ni] = verify::converse_cosh(
            *source, q_t, n_pairs,
            derive_seed(cfg.seed, {{"cosh", static_cast<std::uint64_t>(n_dim)}}));
        const double nd = static_cast<double>(n_dim);
        // Fourth-moment expansion for the isotropic family:
        // 2 E[e^{-2|x|^2/N}] (2/N), the expectation by the exact
        // chi-square Laplace transform.
        cosh_oracle[ni] =
            isotropic ? 2.0 * std::pow(1.0 + 4.0 / nd, -nd / 2.0) * (2.0 / nd) : 0.0;
        ctx.data["converse_cosh"].push_back(json{{"n_dim", n_dim},
                                                 {"q_target", q_t},
                                                 {"value", cosh_points[ni].value},
                                                 {"se", cosh_points[ni].se},
                                                 {"n_pairs", cosh_points[ni].n_pairs},
                                                 {"taylor_oracle", cosh_oracle[ni]}});
        std::ostringstream row;
        row << n_dim << ',' << fmt17(q_t) << ',' << fmt17(cosh_points[ni].value) << ','
            << fmt17(cosh_points[ni].se) << ',' << fmt17(cosh_oracle[ni]);
        cosh_table.rows.push_back(row.str());
    }
    ctx.tables.push_back(std::move(cosh_table));

    bool decreasing = true;
    for (std::size_t ni = 1; ni < n_list.size(); ++ni) {
        const double slack = 2.0 * std::sqrt(cosh_points[ni].se * cosh_points[ni].se +
                                             cosh_points[ni - 1].se * cosh_points[ni - 1].se);
        if (cosh_points[ni].value > cosh_points[ni - 1].value + slack) decreasing = false;
    }
    ctx.check("cosh-decreasing", decreasing, decreasing, 1.0,
              "converse functional decreases along the N list (2 SE slack)");
    const std::size_t last = n_list.size() - 1;
    if (isotropic) {
        ctx.check("cosh-fourth-moment-oracle",
                  std::abs(cosh_points[last].value - cosh_oracle[last]) <=
                      4.0 * cosh_points[last].se,
                  cosh_points[last].value, cosh_oracle[last],
                  "largest-N value vs Taylor/chi-square oracle (4 SE)");
    }

    // Laplace-transform identity at the largest N.
    const int n_big = n_list[last];
    auto source_big = cfg.source.make(n_big);
    const auto laplace =
        verify::converse_laplace(*source_big, source_big->rho(), cfg.lambdas, n_samples,
                                 derive_seed(cfg.seed, {{"laplace", static_cast<std::uint64_t>(n_big)}}));
    CsvTable lap_table;
    lap_table.name = "converse_laplace.csv";
    lap_table.header = "N,lambda,lhs,rhs,gap,se,gap_oracle";
    for (const auto& pt : laplace) {
        double gap_oracle = 0.0;
        if (isotropic) {
            const double nd = static_cast<double>(n_big);
            gap_oracle = std::pow(1.0 + 2.0 * pt.lambda / nd, -nd / 2.0) -
                         std::exp(-pt.lambda * source_big->rho());
        }
        ctx.data["converse_laplace"].push_back(json{{"n_dim", n_big},
                                                    {"lambda", pt.lambda},
                                                    {"lhs", pt.lhs},
                                                    {"rhs", pt.rhs},
                                                    {"gap", pt.gap},
                                                    {"se", pt.se},
                                                    {"gap_oracle", gap_oracle}});
        std::ostringstream row;
        row << n_big << ',' << fmt17(pt.lambda) << ',' << fmt17(pt.lhs) << ',' << fmt17(pt.rhs)
            << ',' << fmt17(pt.gap) << ',' << fmt17(pt.se) << ',' << fmt17(gap_oracle);
        lap_table.rows.push_back(row.str());
        std::ostringstream name;
        name << "laplace-gap-lambda" << pt.lambda;
        if (isotropic) {
            ctx.check(name.str(), std::abs(pt.gap - gap_oracle) <= 4.0 * pt.se, pt.gap,
                      gap_oracle, "Monte Carlo gap vs exact chi-square oracle (4 SE)");
        } else {
            // |x|^2/N == 1 makes every sample equal; the gap is zero to
            // floating-point accumulation error.
            ctx.check(name.str(), std::abs(pt.gap) <= 1e-14, pt.gap, 1e-14,
                      "hypercube norm identity: gap at machine precision");
        }
    }
    ctx.tables.push_back(std::move(lap_table));

    if (isotropic) {
        const double q_probe = source_big->q() + cfg.wrong_q_delta;
        const auto probe = verify::converse_cosh(
            *source_big, q_probe, n_pairs,
            derive_seed(cfg.seed, {{"cosh-wrong-q", static_cast<std::uint64_t>(n_big)}}));
        const double lower_bound = std::exp(-2.0 * source_big->rho()) *
                                   (std::cosh(2.0 * cfg.wrong_q_delta) - 1.0) / 2.0;
        CsvTable wrong;
        wrong.name = "converse_wrong_q.csv";
        wrong.header = "N,q_target,value,se,lower_bound";
        std::ostringstream row;
        row << n_big << ',' << fmt17(q_probe) << ',' << fmt17(probe.value) << ','
            << fmt17(probe.se) << ',' << fmt17(lower_bound);
        wrong.rows.push_back(row.str());
        ctx.tables.push_back(std::move(wrong));
        ctx.check("wrong-q-probe", probe.value >= lower_bound / 2.0, probe.value,
                  lower_bound / 2.0, "misdeclared overlap keeps the functional away from 0");
    }
}

// --- haar-moments -------------------------------------------------------

void run_haar_moments(RunContext& ctx) {
    const auto& cfg = *ctx.cfg;
    const std::int64_t draws = cfg.haar_draws * profile_scale(cfg);
    constexpr std::int64_t kChunk = 8192;

    CsvTable table;
    table.name = "haar_moments.csv";
    table.header = "n,check,target,estimate,se,z";

    enum Slot {
        kU11,
        kU11Sq,
        kPoint4,
        kPoint5,
        kPoint6,
        kPoint7,
        kMinor1212,
        kMinor1221,
        kMinor1234,
        kPoint9,
        kU11M1,
        kU11M2,
        kU11M3,
        kU11M4,
        kU23M1,
        kU23M2,
        kU23M3,
        kU23M4,
        kSlotCount
    };

    for (const int n : cfg.haar_orders) {
        const std::int64_t n_chunks = (draws + kChunk - 1) / kChunk;
        std::vector<std::vector<OnlineMoments>> chunk_stats(
            n_chunks, std::vector<OnlineMoments>(kSlotCount));

        parallel_for(static_cast<std::size_t>(n_chunks), cfg.threads, [&](std::size_t c) {
            Rng rng(derive_seed(cfg.seed,
                                {{"haar", static_cast<std::uint64_t>(n)}, {"chunk", c}}));
            haar::HaarSampler sampler(n);
            auto& stats = chunk_stats[c];
            const std::int64_t begin = static_cast<std::int64_t>(c) * kChunk;
            const std::int64_t count = std::min(kChunk, draws - begin);
            double prev_minor = 0.0;
            bool have_prev = false;
            for (std::int64_t t = 0; t < count; ++t) {
                const auto& u = sampler.sample(rng);
                const double u11 = u(0, 0), u12 = u(0, 1), u21 = u(1, 0), u22 = u(1, 1);
                stats[kU11].add(u11);
                stats[kU11Sq].add(u11 * u11);
                stats[kPoint4].add(u11 * u11 * u12 * u12);
                stats[kPoint5].add(u11 * u11 * u22 * u22);
                stats[kPoint6].add(u11 * u11 * u11 * u21);
                stats[kPoint7].add(u11 * u12 * u21 * u22);
                const double m12 = u11 * u22 - u12 * u21;  // rows (1,2), cols (1,2)
                stats[kMinor1212].add(m12 * m12);
                const double m21 = u21 * u12 - u22 * u11;  // rows (2,1), cols (1,2)
                stats[kMinor1221].add(m12 * m21);
                const double m34 = u(2, 0) * u(3, 1) - u(2, 1) * u(3, 0);
                stats[kMinor1234].add(m12 * m34);
                if (have_prev) {
                    stats[kPoint9].add(prev_minor * m12);
                    have_prev = false;
                } else {
                    prev_minor = m12;
                    have_prev = true;
                }
                const double u23 = u(1, 2);
                double pw1 = u11, pw2 = u23;
                stats[kU11M1].add(pw1);
                stats[kU23M1].add(pw2);
                pw1 *= u11;
                pw2 *= u23;
                stats[kU11M2].add(pw1);
                stats[kU23M2].add(pw2);
                pw1 *= u11;
                pw2 *= u23;
                stats[kU11M3].add(pw1);
                stats[kU23M3].add(pw2);
                pw1 *= u11;
                pw2 *= u23;
                stats[kU11M4].add(pw1);
                stats[kU23M4].add(pw2);
            }
        });

        std::vector<OnlineMoments> total(kSlotCount);
        for (const auto& chunk : chunk_stats) {
            for (int s = 0; s < kSlotCount; ++s) total[s].merge(chunk[s]);
        }

        const auto oracle = [&](std::initializer_list<std::pair<int, int>> factors) {
            haar::MomentPattern pattern;
            pattern.factors.assign(factors.begin(), factors.end());
            return haar::haar_moment_oracle(n, pattern);
        };
        struct Check {
            const char* name;
            Slot slot;
            double target;
        };
        const std::vector<Check> simple_checks = {
            {"point2-mean-u11", kU11, oracle({{1, 1}})},
            {"point3-u11sq", kU11Sq, oracle({{1, 1}, {1, 1}})},
            {"point4-samerow", kPoint4, oracle({{1, 1}, {1, 1}, {1, 2}, {1, 2}})},
            {"point5-disjoint", kPoint5, oracle({{1, 1}, {1, 1}, {2, 2}, {2, 2}})},
            {"point6-odd-zero", kPoint6, oracle({{1, 1}, {1, 1}, {1, 1}, {2, 1}})},
            {"point7-minor", kPoint7, oracle({{1, 1}, {1, 2}, {2, 1}, {2, 2}})},
            {"point8-1212", kMinor1212, haar::minor_covariance_oracle(n, 1, 2, 1, 2)},
            {"point8-1221", kMinor1221, haar::minor_covariance_oracle(n, 1, 2, 2, 1)},
            {"point8-1234", kMinor1234, haar::minor_covariance_oracle(n, 1, 2, 3, 4)},
            {"point9-independent", kPoint9, 0.0},
        };
        for (const auto& chk : simple_checks) {
            const auto& m = total[chk.slot];
            const double z = m.zscore(chk.target);
            std::ostringstream row;
            row << n << ',' << chk.name << ',' << fmt17(chk.target) << ',' << fmt17(m.mean())
                << ',' << fmt17(m.se()) << ',' << fmt17(z);
            table.rows.push_back(row.str());
            ctx.check("n" + std::to_string(n) + "-" + chk.name, std::abs(z) <= 4.0, z, 4.0);
        }
        // Point 1: entries identically distributed — first four moments
        // of u11 and u23 agree.
        for (int midx = 0; midx < 4; ++midx) {
            const auto& a = total[kU11M1 + midx];
            const auto& b = total[kU23M1 + midx];
            const double se = std::sqrt(a.se() * a.se() + b.se() * b.se());
            const double z = (a.mean() - b.mean()) / se;
            std::ostringstream row;
            row << n << ",point1-moment" << (midx + 1) << ',' << fmt17(b.mean()) << ','
                << fmt17(a.mean()) << ',' << fmt17(se) << ',' << fmt17(z);
            table.rows.push_back(row.str());
            ctx.check("n" + std::to_string(n) + "-point1-moment" + std::to_string(midx + 1),
                      std::abs(z) <= 4.0, z, 4.0, "u11 vs u23 moment agreement");
        }
    }
    ctx.tables.push_back(std::move(table));

    if (cfg.drift_samples > 0) {
        Rng rng(derive_seed(cfg.seed, {{"drift", 0}}));
        const auto drift =
            haar::drift_check(cfg.drift_n, cfg.drift_epsilon, cfg.drift_samples, rng);
        CsvTable dt;
        dt.name = "drift.csv";
        dt.header = "component,z";
        for (std::size_t i = 0; i < drift.z.size(); ++i) {
            dt.rows.push_back(std::to_string(i + 1) + "," + fmt17(drift.z[i]));
        }
        ctx.tables.push_back(std::move(dt));
        ctx.check("drift-max-z", drift.max_abs_z <= 5.0, drift.max_abs_z, 5.0,
                  "componentwise drift z-scores against -theta");
    }
}

// --- metrics-selftest ----------------------------------------------------

// Exact 1D transport cost by exhausting all assignments; the LP optimum
// over doubly-stochastic couplings is attained at a permutation.
double brute_force_transport_1d(std::span<const double> a, std::span<const double> b) {
    std::vector<int> perm(a.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double cost = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) cost += std::abs(a[i] - b[perm[i]]);
        best = std::min(best, cost);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(a.size());
}

void run_metrics_selftest(RunContext& ctx) {
    const auto& cfg = *ctx.cfg;
    CsvTable table;
    table.name = "metrics_selftest.csv";
    table.header = "check,value,gate,pass";
    const auto record = [&](const std::string& name, double value, double gate, bool pass,
                            const std::string& detail = "") {
        table.rows.push_back(name + "," + fmt17(value) + "," + fmt17(gate) + "," +
                             (pass ? "1" : "0"));
        ctx.check(name, pass, value, gate, detail);
    };

    // 1D W1 vs exhaustive transport oracle on n = 6 instances.
    {
        Rng rng(derive_seed(cfg.seed, {{"selftest-w1-lp", 0}}));
        double worst = 0.0;
        for (std::int64_t inst = 0; inst < cfg.selftest_instances; ++inst) {
            std::vector<double> a(6), b(6);
            for (auto& v : a) v = rng.normal();
            for (auto& v : b) v = 0.3 + 1.5 * rng.normal();
            worst = std::max(worst,
                             std::abs(metrics::w1_1d(a, b) - brute_force_transport_1d(a, b)));
        }
        record("w1-1d-vs-lp-oracle", worst, 1e-12, worst <= 1e-12,
               "order statistics vs exhaustive assignment");
    }

    // Translation identity for the exact k-d matcher.
    {
        Rng rng(derive_seed(cfg.seed, {{"selftest-translation", 0}}));
        double worst = 0.0;
        for (int inst = 0; inst < 20; ++inst) {
            const int k = 1 + inst % 3;
            const int n = 48;
            metrics::Cloud a, b;
            a.n = b.n = n;
            a.k = b.k = k;
            a.data.resize(static_cast<std::size_t>(n) * k);
            for (auto& v : a.data) v = rng.normal();
            std::vector<double> shift(k);
            double norm = 0.0;
            for (auto& v : shift) {
                v = rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
            b.data = a.data;
            for (int i = 0; i < n; ++i) {
                for (int d = 0; d < k; ++d) b.data[static_cast<std::size_t>(i) * k + d] += shift[d];
            }
            worst = std::max(worst, std::abs(metrics::w1_exact_kd(a, b) - norm));
        }
        record("w1-kd-translation", worst, 1e-10, worst <= 1e-10,
               "W1(a, a+v) equals |v| exactly");
    }

    // Marginal monotonicity of exact W1 on coordinate subsets.
    {
        Rng rng(derive_seed(cfg.seed, {{"selftest-marginal", 0}}));
        double worst = -std::numeric_limits<double>::infinity();
        for (int inst = 0; inst < 100; ++inst) {
            const int n = 24, k = 3;
            metrics::Cloud a, b;
            a.n = b.n = n;
            a.k = b.k = k;
            a.data.resize(static_cast<std::size_t>(n) * k);
            b.data.resize(static_cast<std::size_t>(n) * k);
            // Correlated coordinates so the marginals are nontrivial.
            for (int i = 0; i < n; ++i) {
                const double common = rng.normal();
                for (int d = 0; d < k; ++d) {
                    a.data[static_cast<std::size_t>(i) * k + d] = common + 0.7 * rng.normal();
                    b.data[static_cast<std::size_t>(i) * k + d] =
                        0.4 + 0.8 * common + rng.normal();
                }
            }
            const double full = metrics::w1_exact_kd(a, b);
            const std::vector<std::vector<int>> subsets = {{0}, {1}, {2}, {0, 1}, {1, 2}};
            for (const auto& subset : subsets) {
                metrics::Cloud am, bm;
                am.n = bm.n = n;
                am.k = bm.k = static_cast<int>(subset.size());
                for (int i = 0; i < n; ++i) {
                    for (const int d : subset) {
                        am.data.push_back(a.data[static_cast<std::size_t>(i) * k + d]);
                        bm.data.push_back(b.data[static_cast<std::size_t>(i) * k + d]);
                    }
                }
                worst = std::max(worst, metrics::w1_exact_kd(am, bm) - full);
            }
        }
        record("w1-marginal-monotonicity", worst, 1e-10, worst <= 1e-10,
               "W1 of any coordinate marginal never exceeds the joint W1");
    }

    // Product-function Lipschitz bound r L M^{r-1}.
    {
        const auto catalog = metrics::make_catalog(2, 1.0, 1.0, 4, cfg.catalog_seed);
        Rng rng(derive_seed(cfg.seed, {{"selftest-lipschitz", 0}}));
        for (int r = 1; r <= 4; ++r) {
            const auto report =
                metrics::lipschitz_product_check(catalog.members[1], 2, r, cfg.quotient_trials, rng);
            record("lipschitz-product-r" + std::to_string(r), report.max_quotient, report.bound,
                   report.ok, "empirical quotients under r L M^{r-1}");
        }
    }

    // Duality sandwich: catalog mean differences under exact W1.
    {
        const auto catalog = metrics::make_catalog(2, 1.0, 1.0, 8, cfg.catalog_seed);
        Rng rng(derive_seed(cfg.seed, {{"selftest-duality", 0}}));
        double worst = -std::numeric_limits<double>::infinity();
        for (int inst = 0; inst < 10; ++inst) {
            const int n = 32, k = 2;
            metrics::Cloud a, b;
            a.n = b.n = n;
            a.k = b.k = k;
            a.data.resize(static_cast<std::size_t>(n) * k);
            b.data.resize(static_cast<std::size_t>(n) * k);
            for (auto& v : a.data) v = rng.normal();
            for (auto& v : b.data) v = 0.5 + rng.normal();
            const double w1 = metrics::w1_exact_kd(a, b);
            for (const auto& g : catalog.members) {
                double ma = 0.0, mb = 0.0;
                for (int i = 0; i < n; ++i) {
                    ma += g.eval(a.row(i));
                    mb += g.eval(b.row(i));
                }
                worst = std::max(worst, std::abs(ma - mb) / n - w1);
            }
        }
        record("duality-sandwich", worst, 1e-10, worst <= 1e-10,
               "|mean_a g - mean_b g| <= W1 for 1-Lipschitz members");
    }

    // Shift equivariance of the 1D estimator.
    {
        Rng rng(derive_seed(cfg.seed, {{"selftest-shift", 0}}));
        double worst = 0.0;
        for (int inst = 0; inst < 20; ++inst) {
            std::vector<double> a(64), b(64);
            for (auto& v : a) v = rng.normal();
            for (auto& v : b) v = rng.normal() * 1.3;
            const double base = metrics::w1_1d(a, b);
            const double c = rng.uniform(-5.0, 5.0);
            for (auto& v : a) v += c;
            for (auto& v : b) v += c;
            worst = std::max(worst, std::abs(metrics::w1_1d(a, b) - base));
        }
        record("w1-1d-shift-equivariance", worst, 1e-12, worst <= 1e-12);
    }

    ctx.tables.push_back(std::move(table));
}

void execute(const ExperimentConfig& cfg, RunContext& ctx) {
    ctx.cfg = &cfg;
    if (cfg.kind == "concentration") {
        run_concentration(ctx);
    } else if (cfg.kind == "theorem-scaling") {
        run_theorem_scaling(ctx);
    } else if (cfg.kind == "sk-cavity") {
        run_sk_cavity(ctx);
    } else if (cfg.kind == "converse") {
        run_converse(ctx);
    } else if (cfg.kind == "haar-moments") {
        run_haar_moments(ctx);
    } else if (cfg.kind == "metrics-selftest") {
        run_metrics_selftest(ctx);
    } else {
        throw ConfigError("config.kind: unknown experiment kind '" + cfg.kind + "'");
    }
}

}  // namespace

RunReport run(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    const std::string dir = config.resolve_out_dir();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());

    RunContext ctx;
    ctx.out_dir = dir;
    execute(config, ctx);

    RunReport report;
    report.config_echo = config.to_json();
    report.config_digest = config.digest();
    report.checks = ctx.checks;
    report.data = ctx.data;

    {
        std::ofstream echo(dir + "/config_echo.json");
        if (!echo) throw IoError("cannot write config echo in " + dir);
        echo << report.config_echo.dump(2) << "\n";
        report.artifacts.push_back(dir + "/config_echo.json");
    }
    for (const auto& table : ctx.tables) {
        const std::string path = dir + "/" + table.name;
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path);
        out << table.header << "\n";
        for (const auto& row : table.rows) out << row << "\n";
        if (!out) throw IoError("write failed for " + path);
        report.artifacts.push_back(path);
    }
    for (const auto& path : ctx.extra_artifacts) report.artifacts.push_back(path);

    const auto end = std::chrono::steady_clock::now();
    report.wall_time_s = std::chrono::duration<double>(end - start).count();

    {
        std::ofstream out(dir + "/report.json");
        if (!out) throw IoError("cannot write report.json in " + dir);
        out << report.to_json().dump(2) << "\n";
        report.artifacts.push_back(dir + "/report.json");
    }
    {
        std::ofstream out(dir + "/summary.txt");
        if (!out) throw IoError("cannot write summary.txt in " + dir);
        out << "projlab run: " << config.kind << " (seed " << config.seed << ", profile "
            << config.profile << ")\n";
        out << "config digest: " << report.config_digest << "\n\n";
        for (const auto& c : report.checks) {
            out << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << "  value=" << fmt17(c.value)
                << "  gate=" << fmt17(c.gate);
            if (!c.detail.empty()) out << "  (" << c.detail << ")";
            out << "\n";
        }
        out << "\nwall time: " << fmt17(report.wall_time_s) << " s\n";
        report.artifacts.push_back(dir + "/summary.txt");
    }
    return report;
}

std::string format_run_dir(const std::string& run_dir) {
    std::ifstream in(run_dir + "/report.json");
    if (!in) throw IoError("no report.json under " + run_dir);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError(std::string("report.json is not valid JSON: ") + e.what());
    }
    std::ostringstream out;
    out << "run: " << j.at("config").at("kind").get<std::string>() << "  seed "
        << j.at("config").at("seed").get<std::uint64_t>() << "\n";
    out << "digest: " << j.at("config_digest").get<std::string>() << "\n";
    out << "wall time: " << j.at("wall_time_s").get<double>() << " s\n";
    int failures = 0;
    for (const auto& c : j.at("checks")) {
        const bool pass = c.at("pass").get<bool>();
        if (!pass) ++failures;
        out << (pass ? "  [PASS] " : "  [FAIL] ") << c.at("name").get<std::string>()
            << "  value=" << fmt17(c.at("value").get<double>())
            << "  gate=" << fmt17(c.at("gate").get<double>()) << "\n";
    }
    out << (failures == 0 ? "all checks passed\n"
                          : std::to_string(failures) + " check(s) failed\n");
    return out.str();
}

bool selftest(std::uint64_t seed) {
    // Metrics oracle suite (small instance counts).
    ExperimentConfig cfg;
    cfg.kind = "metrics-selftest";
    cfg.seed = seed;
    cfg.selftest_instances = 20;
    cfg.quotient_trials = 4000;
    RunContext ctx;
    execute(cfg, ctx);

    // Replica-symmetric algebra against dense numeric oracles.
    {
        Rng rng(derive_seed(seed, {{"selftest-algebra", 0}}));
        double worst_inv = 0.0, worst_eig = 0.0, worst_op = 0.0;
        for (int inst = 0; inst < 50; ++inst) {
            const int m = 2 + static_cast<int>(rng.uniform_index(15));
            const double rho = rng.uniform(0.5, 3.0);
            const double lo = -rho / (m - 1) * 0.9;
            const double q = rng.uniform(lo, rho * 0.9);
            const auto r = rs::rs_build(m, rho, q);
            if (!rs::positive_definite(r)) continue;
            const Eigen::MatrixXd dense = rs::densify(r);
            const Eigen::MatrixXd product = rs::densify(rs::rs_inverse(r)) * dense;
            worst_inv = std::max(
                worst_inv,
                (product - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
            const auto ev = rs::rs_eigvals(r);
            worst_eig = std::max(worst_eig, std::abs(es.eigenvalues().maxCoeff() -
                                                     std::max(ev.top, ev.rest)));
        }
        for (int p = 1; p <= 3; ++p) {
            for (int k = 1; k <= 3; ++k) {
                const double rho = 1.5, q = 0.5;
                const rs::KronCovariance sigma{rs::rs_build(2 * p, rho, q), k};
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rs::densify(sigma));
                const double numeric = 1.0 / std::sqrt(es.eigenvalues().minCoeff());
                worst_op =
                    std::max(worst_op, std::abs(numeric - rs::sigma_inv_sqrt_opnorm(rho, q)));
            }
        }
        ctx.checks.push_back({"algebra-inverse-identity", worst_inv <= 1e-12, worst_inv, 1e-12,
                              "dense(R^-1) dense(R) = I"});
        ctx.checks.push_back({"algebra-eigvals-vs-dense", worst_eig <= 1e-12, worst_eig, 1e-12,
                              "closed-form spectrum vs numeric eigensolver"});
        ctx.checks.push_back({"algebra-opnorm-vs-dense", worst_op <= 1e-10, worst_op, 1e-10,
                              "1/sqrt(rho-q) vs dense inverse square root"});
    }

    bool all = true;
    for (const auto& c : ctx.checks) {
        std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << "  value=" << fmt17(c.value)
                  << "  gate=" << fmt17(c.gate) << "\n";
        all = all && c.pass;
    }
    std::cout << (all ? "selftest: all checks passed\n" : "selftest: FAILURES present\n");
    return all;
}

}  // namespace projlab::experiments
