#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "projlab/metrics.hpp"
#include "projlab/rng.hpp"
#include "projlab/sources.hpp"

namespace projlab::verify {

// Empirical thin-shell and overlap diagnostics for a source at fixed N:
// rho_hat, q_hat are first moments of |x|^2/N and x1.x2/N; c1_hat, c2_hat
// the centered second moments around the targets; d1, d2 the rate
// functions evaluated at them.
struct ConcentrationReport {
    int n_dim = 0;
    std::int64_t n_pairs = 0;
    double rho_target = 0.0;
    double q_target = 0.0;
    bool rho_declared = false;  // target supplied vs empirical mean
    bool q_declared = false;
    double rho_hat = 0.0;
    double q_hat = 0.0;
    double c1_hat = 0.0;
    double c2_hat = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double se_rho = 0.0;
    double se_q = 0.0;
    double se_c1 = 0.0;  // jackknife
    double se_c2 = 0.0;  // jackknife
};

ConcentrationReport concentration_report(const sources::VectorSource& source,
                                         std::int64_t n_pairs, std::uint64_t seed,
                                         std::optional<double> rho_target = std::nullopt,
                                         std::optional<double> q_target = std::nullopt);

// Same statistics computed from an existing pair stream (used by the
// disorder-averaged SK pipeline).
ConcentrationReport concentration_report_stream(sources::PairStream& pairs, int n_dim,
                                                std::int64_t n_pairs,
                                                std::optional<double> rho_target,
                                                std::optional<double> q_target);

struct Rates {
    double d1 = 0.0;
    double d2 = 0.0;
};

// d1(y) = sqrt(3 N^2 y + 4 N rho sqrt(y) + 2 N rho^2), and d2 likewise
// with q in place of rho.
Rates rates(double c1, double c2, double n_dim, double rho, double q);

// Alternating-binomial identity underpinning the replica expansion:
// sum_{r=1..n} (-1)^{r+1} C(n,r) == 1 for even n, checked in exact
// integer arithmetic.
bool binomial_identity_holds(int n);

enum class LhsVariant { partial, full };

struct TheoremLhsEstimate {
    LhsVariant variant = LhsVariant::partial;
    int p = 1;
    int k = 1;
    std::string g_id;
    double value = 0.0;
    double se = 0.0;
    std::int64_t outer_draws = 0;
    int inner_replicas = 0;
};

// Unbiased estimator of the 2p-th moment of the gap between the
// projected source statistic <g(Theta^T x)> and its Gaussian reference,
// via the signed binomial replica expansion. Per outer draw of
// Theta (and of the reference shift), `inner_replicas` source replicas
// and as many Gaussian reference replicas are drawn; each expansion term
// E[<g^1..g^r> E_xi(gbar^{r+1}..gbar^{2p})] is estimated by normalized
// elementary symmetric means over distinct replicas, so the whole signed
// sum stays exactly unbiased. The partial variant references
// Theta^T<x> + sqrt(rho-q) xi; the full variant references
// sqrt(q) z + sqrt(rho-q) xi with z the normalized projection of the
// mean vector (exactly standard Gaussian, shared across the 2p replicas
// of one outer draw). Jackknife standard errors across outer draws.
TheoremLhsEstimate lhs_moment_partial(const sources::VectorSource& source,
                                      const metrics::TestFunction& g, int p, int k,
                                      std::int64_t outer_draws, int inner_replicas,
                                      std::uint64_t seed, int threads = 1);

TheoremLhsEstimate lhs_moment_full(const sources::VectorSource& source,
                                   const metrics::TestFunction& g, int p, int k,
                                   std::int64_t outer_draws, int inner_replicas,
                                   std::uint64_t seed, int threads = 1);

// Batch version over a whole catalog, sharing projections across members.
std::vector<TheoremLhsEstimate> lhs_moment_batch(const sources::VectorSource& source,
                                                 const metrics::TestCatalog& catalog,
                                                 LhsVariant variant, int p,
                                                 std::int64_t outer_draws, int inner_replicas,
                                                 std::uint64_t seed, int threads = 1);

using SourceFamily = std::function<std::unique_ptr<sources::VectorSource>(int)>;

struct ScalingPoint {
    int n_dim = 0;
    double estimate = 0.0;  // sup over catalog members
    double se = 0.0;        // SE of the attaining member
    std::string g_id;
};

struct ScalingReport {
    std::vector<ScalingPoint> points;
    std::vector<std::vector<TheoremLhsEstimate>> per_member;  // [N index][member]
    // Least-squares slope of log(estimate) vs log(N); NaN (gate failure)
    // if any per-N estimate is nonpositive. Only the decay order is
    // tested; the unknown constants in the rate are never estimated.
    double slope = 0.0;
    bool monotone_within_2se = false;
};

ScalingReport scaling_check(const SourceFamily& family, std::span<const int> n_list,
                            const metrics::TestCatalog& catalog, LhsVariant variant, int p,
                            std::int64_t outer_draws, int inner_replicas, std::uint64_t seed,
                            int threads = 1);

// Single-test-function convenience wrapper (a one-member catalog).
ScalingReport scaling_check(const SourceFamily& family, std::span<const int> n_list,
                            const metrics::TestFunction& g, int k, LhsVariant variant, int p,
                            std::int64_t outer_draws, int inner_replicas, std::uint64_t seed,
                            int threads = 1);

struct ConverseCoshEstimate {
    double value = 0.0;
    double se = 0.0;
    std::int64_t n_pairs = 0;
};

// Monte Carlo estimate of the converse functional
//   2 E[ exp(-|x1|^2/N - |x2|^2/N) (cosh(2 x1.x2/N - 2 q_target) - 1) ],
// which vanishes asymptotically iff the overlap concentrates at q_target
// (given norm tightness).
ConverseCoshEstimate converse_cosh(const sources::VectorSource& source, double q_target,
                                   std::int64_t n_pairs, std::uint64_t seed);

struct LaplacePoint {
    double lambda = 0.0;
    double lhs = 0.0;  // Monte Carlo E exp(-lambda |x|^2/N)
    double rhs = 0.0;  // exp(-lambda rho_target)
    double gap = 0.0;  // lhs - rhs
    double se = 0.0;
};

std::vector<LaplacePoint> converse_laplace(const sources::VectorSource& source,
                                           double rho_target,
                                           std::span<const double> lambdas,
                                           std::int64_t n_samples, std::uint64_t seed);

}  // namespace projlab::verify
