#include "projlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "projlab/parallel.hpp"
#include "projlab/projection.hpp"
#include "projlab/stats.hpp"

namespace projlab::verify {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

}  // namespace

Rates rates(double c1, double c2, double n_dim, double rho, double q) {
    if (c1 < 0.0 || c2 < 0.0) throw DomainError("rates: c1 and c2 must be >= 0");
    Rates r;
    r.d1 = std::sqrt(3.0 * n_dim * n_dim * c1 + 4.0 * n_dim * rho * std::sqrt(c1) +
                     2.0 * n_dim * rho * rho);
    r.d2 = std::sqrt(3.0 * n_dim * n_dim * c2 + 4.0 * n_dim * q * std::sqrt(c2) +
                     2.0 * n_dim * q * q);
    return r;
}

ConcentrationReport concentration_report_stream(sources::PairStream& pairs, int n_dim,
                                                std::int64_t n_pairs,
                                                std::optional<double> rho_target,
                                                std::optional<double> q_target) {
    if (n_pairs < 2) throw DomainError("concentration_report: n_pairs must be >= 2");
    const double nd = static_cast<double>(n_dim);
    std::vector<double> norms;   // |x|^2/N, two per pair
    std::vector<double> overlaps;  // x1.x2/N, one per pair
    norms.reserve(2 * n_pairs);
    overlaps.reserve(n_pairs);
    std::vector<double> x1(n_dim), x2(n_dim);
    for (std::int64_t t = 0; t < n_pairs; ++t) {
        pairs.next(x1, x2);
        norms.push_back(squared_norm(x1) / nd);
        norms.push_back(squared_norm(x2) / nd);
        overlaps.push_back(dot(x1, x2) / nd);
    }

    ConcentrationReport report;
    report.n_dim = n_dim;
    report.n_pairs = n_pairs;
    report.rho_hat = mean(norms);
    report.q_hat = mean(overlaps);
    report.se_rho = standard_error(norms);
    report.se_q = standard_error(overlaps);
    report.rho_declared = rho_target.has_value();
    report.q_declared = q_target.has_value();
    report.rho_target = rho_target.value_or(report.rho_hat);
    report.q_target = q_target.value_or(report.q_hat);

    const auto centered_m2 = [](std::span<const double> xs, double target) {
        std::vector<double> sq(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double d = xs[i] - target;
            sq[i] = d * d;
        }
        return sq;
    };
    const auto sq1 = centered_m2(norms, report.rho_target);
    report.c1_hat = mean(sq1);
    report.se_c1 = report.rho_declared ? standard_error(sq1) : jackknife_se_central_m2(norms);
    const auto sq2 = centered_m2(overlaps, report.q_target);
    report.c2_hat = mean(sq2);
    report.se_c2 = report.q_declared ? standard_error(sq2) : jackknife_se_central_m2(overlaps);

    const Rates r = rates(report.c1_hat, report.c2_hat, nd, report.rho_target, report.q_target);
    report.d1 = r.d1;
    report.d2 = r.d2;
    return report;
}

ConcentrationReport concentration_report(const sources::VectorSource& source,
                                         std::int64_t n_pairs, std::uint64_t seed,
                                         std::optional<double> rho_target,
                                         std::optional<double> q_target) {
    auto pairs = source.make_pair_stream(derive_seed(seed, {{"concentration", 0}}));
    return concentration_report_stream(*pairs, source.dimension(), n_pairs, rho_target,
                                       q_target);
}

bool binomial_identity_holds(int n) {
    if (n < 2 || n % 2 != 0) return false;
    // Pascal row in exact integers.
    std::vector<long long> c(n + 1, 0);
    c[0] = 1;
    for (int row = 1; row <= n; ++row) {
        for (int j = row; j >= 1; --j) c[j] += c[j - 1];
    }
    long long acc = 0;
    for (int r = 1; r <= n; ++r) acc += (r % 2 == 1 ? c[r] : -c[r]);
    return acc == c[0];
}

namespace {

// Signed binomial coefficients (-1)^{2p-r} C(2p, r) for r = 0..2p.
std::vector<double> signed_binomials(int two_p) {
    std::vector<double> c(two_p + 1, 0.0);
    c[0] = 1.0;
    for (int row = 1; row <= two_p; ++row) {
        for (int j = row; j >= 1; --j) c[j] += c[j - 1];
    }
    std::vector<double> out(two_p + 1);
    for (int r = 0; r <= two_p; ++r) {
        const int sign = ((two_p - r) % 2 == 0) ? 1 : -1;
        out[r] = sign * c[r];
    }
    return out;
}

// Normalized elementary symmetric means e_r / C(n, r) from power sums,
// via Newton's identities. E[e_r/C(n,r)] = mu^r for iid inputs, which is
// what makes each expansion term unbiased.
void normalized_elementary(std::span<const double> power_sums, int order, double n,
                           std::span<double> out) {
    std::vector<double> e(order + 1, 0.0);
    e[0] = 1.0;
    for (int j = 1; j <= order; ++j) {
        double acc = 0.0;
        double sign = 1.0;
        for (int i = 1; i <= j; ++i) {
            acc += sign * e[j - i] * power_sums[i];
            sign = -sign;
        }
        e[j] = acc / static_cast<double>(j);
    }
    double binom = 1.0;  // C(n, r) built incrementally
    out[0] = 1.0;
    for (int r = 1; r <= order; ++r) {
        binom *= (n - static_cast<double>(r - 1)) / static_cast<double>(r);
        out[r] = e[r] / binom;
    }
}

struct LhsSettings {
    LhsVariant variant;
    int p;
    int k;
    std::int64_t outer_draws;
    int inner_replicas;
    std::uint64_t seed;
    int threads;
};

std::vector<TheoremLhsEstimate> lhs_moment_impl(const sources::VectorSource& source,
                                                std::span<const metrics::TestFunction> members,
                                                const LhsSettings& s) {
    // The signed expansion telescopes only because the alternating
    // binomial sums collapse; assert that once in exact arithmetic
    // before any estimator runs.
    static const bool identity_ok = [] {
        for (int n : {2, 4, 6, 8}) {
            if (!binomial_identity_holds(n)) return false;
        }
        return true;
    }();
    if (!identity_ok) throw std::logic_error("lhs_moment: binomial identity check failed");

    const int two_p = 2 * s.p;
    if (s.p < 1) throw DomainError("lhs_moment: p must be >= 1");
    if (s.inner_replicas < two_p) {
        throw DomainError("lhs_moment: inner_replicas must be >= 2p");
    }
    if (s.outer_draws < 2) throw DomainError("lhs_moment: outer_draws must be >= 2");
    const double rho = source.rho();
    const double q = source.q();
    if (!(q >= 0.0 && q < rho)) throw DomainError("lhs_moment: requires 0 <= q < rho");

    const int n_dim = source.dimension();
    const int k = s.k;
    const std::size_t n_members = members.size();

    std::optional<std::vector<double>> mean_vec = source.mean_vector();
    const bool need_mean = (s.variant == LhsVariant::partial) || q > 0.0;
    if (need_mean && !mean_vec.has_value()) {
        throw MissingMean("lhs_moment: source provides no mean vector");
    }
    double mean_norm = 0.0;
    if (mean_vec.has_value()) mean_norm = std::sqrt(squared_norm(*mean_vec));
    if (s.variant == LhsVariant::full && q > 0.0 && mean_norm == 0.0) {
        throw MissingMean("lhs_moment_full: q > 0 requires a nonzero mean vector");
    }

    const double noise_sd = std::sqrt(rho - q);
    // Full variant: sqrt(q) z with z = sqrt(N) Theta^T<x>/|<x>|, i.e. the
    // reference shift is c_full * Theta^T<x>.
    const double c_full =
        (s.variant == LhsVariant::full && q > 0.0)
            ? std::sqrt(q) * std::sqrt(static_cast<double>(n_dim)) / mean_norm
            : 0.0;

    std::vector<double> estimates(static_cast<std::size_t>(s.outer_draws) * n_members);

    parallel_for(static_cast<std::size_t>(s.outer_draws), s.threads, [&](std::size_t item) {
        Rng rng(derive_seed(s.seed, {{"lhs-outer", static_cast<std::uint64_t>(item)}}));
        const auto theta = projection::sample_directions(n_dim, k, rng);

        std::vector<double> shift(k, 0.0);
        if (mean_vec.has_value()) {
            projection::project_into(theta, *mean_vec, shift);
            if (s.variant == LhsVariant::full) {
                for (auto& v : shift) v *= c_full;  // c_full == 0 when q == 0
            }
        }

        // Power sums of g-values per member, source side and reference side.
        std::vector<double> pg(n_members * (two_p + 1), 0.0);
        std::vector<double> ph(n_members * (two_p + 1), 0.0);
        std::vector<double> x(n_dim), y(k);
        for (int t = 0; t < s.inner_replicas; ++t) {
            source.draw(x, rng);
            projection::project_into(theta, x, y);
            for (std::size_t m = 0; m < n_members; ++m) {
                const double v = members[m].eval(y);
                double pw = 1.0;
                double* sums = &pg[m * (two_p + 1)];
                for (int j = 1; j <= two_p; ++j) {
                    pw *= v;
                    sums[j] += pw;
                }
            }
        }
        for (int t = 0; t < s.inner_replicas; ++t) {
            for (int j = 0; j < k; ++j) y[j] = shift[j] + noise_sd * rng.normal();
            for (std::size_t m = 0; m < n_members; ++m) {
                const double v = members[m].eval(y);
                double pw = 1.0;
                double* sums = &ph[m * (two_p + 1)];
                for (int j = 1; j <= two_p; ++j) {
                    pw *= v;
                    sums[j] += pw;
                }
            }
        }

        const std::vector<double> coeff = signed_binomials(two_p);
        std::vector<double> eg(two_p + 1), eh(two_p + 1);
        const double n_inner = static_cast<double>(s.inner_replicas);
        for (std::size_t m = 0; m < n_members; ++m) {
            normalized_elementary(std::span<const double>(&pg[m * (two_p + 1)], two_p + 1),
                                  two_p, n_inner, eg);
            normalized_elementary(std::span<const double>(&ph[m * (two_p + 1)], two_p + 1),
                                  two_p, n_inner, eh);
            double est = 0.0;
            for (int r = 0; r <= two_p; ++r) est += coeff[r] * eg[r] * eh[two_p - r];
            estimates[item * n_members + m] = est;
        }
    });

    std::vector<TheoremLhsEstimate> out(n_members);
    std::vector<double> column(s.outer_draws);
    for (std::size_t m = 0; m < n_members; ++m) {
        for (std::int64_t i = 0; i < s.outer_draws; ++i) {
            column[i] = estimates[static_cast<std::size_t>(i) * n_members + m];
        }
        auto& est = out[m];
        est.variant = s.variant;
        est.p = s.p;
        est.k = k;
        est.g_id = members[m].id;
        est.value = mean(column);
        est.se = standard_error(column);
        est.outer_draws = s.outer_draws;
        est.inner_replicas = s.inner_replicas;
    }
    return out;
}

}  // namespace

TheoremLhsEstimate lhs_moment_partial(const sources::VectorSource& source,
                                      const metrics::TestFunction& g, int p, int k,
                                      std::int64_t outer_draws, int inner_replicas,
                                      std::uint64_t seed, int threads) {
    const metrics::TestFunction members[] = {g};
    return lhs_moment_impl(source, members,
                           {LhsVariant::partial, p, k, outer_draws, inner_replicas, seed,
                            threads})[0];
}

TheoremLhsEstimate lhs_moment_full(const sources::VectorSource& source,
                                   const metrics::TestFunction& g, int p, int k,
                                   std::int64_t outer_draws, int inner_replicas,
                                   std::uint64_t seed, int threads) {
    const metrics::TestFunction members[] = {g};
    return lhs_moment_impl(source, members,
                           {LhsVariant::full, p, k, outer_draws, inner_replicas, seed,
                            threads})[0];
}

std::vector<TheoremLhsEstimate> lhs_moment_batch(const sources::VectorSource& source,
                                                 const metrics::TestCatalog& catalog,
                                                 LhsVariant variant, int p,
                                                 std::int64_t outer_draws, int inner_replicas,
                                                 std::uint64_t seed, int threads) {
    return lhs_moment_impl(source, catalog.members,
                           {variant, p, catalog.k, outer_draws, inner_replicas, seed, threads});
}

ScalingReport scaling_check(const SourceFamily& family, std::span<const int> n_list,
                            const metrics::TestCatalog& catalog, LhsVariant variant, int p,
                            std::int64_t outer_draws, int inner_replicas, std::uint64_t seed,
                            int threads) {
    if (n_list.size() < 3) throw DomainError("scaling_check: need at least 3 sizes");
    for (std::size_t i = 1; i < n_list.size(); ++i) {
        if (n_list[i] <= n_list[i - 1]) {
            throw DomainError("scaling_check: N list must be strictly increasing");
        }
    }
    ScalingReport report;
    for (std::size_t idx = 0; idx < n_list.size(); ++idx) {
        const int n_dim = n_list[idx];
        auto source = family(n_dim);
        auto members = lhs_moment_batch(*source, catalog, variant, p, outer_draws,
                                        inner_replicas,
                                        derive_seed(seed, {{"scaling", static_cast<std::uint64_t>(n_dim)}}),
                                        threads);
        ScalingPoint point;
        point.n_dim = n_dim;
        point.estimate = -std::numeric_limits<double>::infinity();
        for (const auto& est : members) {
            if (est.value > point.estimate) {
                point.estimate = est.value;
                point.se = est.se;
                point.g_id = est.g_id;
            }
        }
        report.points.push_back(point);
        report.per_member.push_back(std::move(members));
    }

    bool all_positive = true;
    for (const auto& pt : report.points) all_positive = all_positive && pt.estimate > 0.0;
    if (all_positive) {
        std::vector<double> lx, ly;
        for (const auto& pt : report.points) {
            lx.push_back(std::log(static_cast<double>(pt.n_dim)));
            ly.push_back(std::log(pt.estimate));
        }
        report.slope = least_squares(lx, ly).slope;
    } else {
        report.slope = std::numeric_limits<double>::quiet_NaN();
    }

    report.monotone_within_2se = true;
    for (std::size_t i = 1; i < report.points.size(); ++i) {
        const auto& prev = report.points[i - 1];
        const auto& cur = report.points[i];
        const double slack = 2.0 * std::sqrt(prev.se * prev.se + cur.se * cur.se);
        if (cur.estimate > prev.estimate + slack) report.monotone_within_2se = false;
    }
    return report;
}

ScalingReport scaling_check(const SourceFamily& family, std::span<const int> n_list,
                            const metrics::TestFunction& g, int k, LhsVariant variant, int p,
                            std::int64_t outer_draws, int inner_replicas, std::uint64_t seed,
                            int threads) {
    metrics::TestCatalog catalog;
    catalog.k = k;
    catalog.lip = g.lip;
    catalog.sup = g.sup;
    catalog.members.push_back(g);
    return scaling_check(family, n_list, catalog, variant, p, outer_draws, inner_replicas,
                         seed, threads);
}

ConverseCoshEstimate converse_cosh(const sources::VectorSource& source, double q_target,
                                   std::int64_t n_pairs, std::uint64_t seed) {
    if (n_pairs < 2) throw DomainError("converse_cosh: n_pairs must be >= 2");
    auto pairs = source.make_pair_stream(derive_seed(seed, {{"converse-cosh", 0}}));
    const int n_dim = source.dimension();
    const double nd = static_cast<double>(n_dim);
    std::vector<double> x1(n_dim), x2(n_dim);
    std::vector<double> samples(n_pairs);
    for (std::int64_t t = 0; t < n_pairs; ++t) {
        pairs->next(x1, x2);
        const double w = std::exp(-squared_norm(x1) / nd - squared_norm(x2) / nd);
        const double overlap = dot(x1, x2) / nd;
        samples[t] = 2.0 * w * (std::cosh(2.0 * overlap - 2.0 * q_target) - 1.0);
    }
    ConverseCoshEstimate est;
    est.value = mean(samples);
    est.se = standard_error(samples);
    est.n_pairs = n_pairs;
    return est;
}

std::vector<LaplacePoint> converse_laplace(const sources::VectorSource& source,
                                           double rho_target,
                                           std::span<const double> lambdas,
                                           std::int64_t n_samples, std::uint64_t seed) {
    for (const double lambda : lambdas) {
        if (lambda < 0.0) throw DomainError("converse_laplace: lambda must be >= 0");
    }
    if (n_samples < 2) throw DomainError("converse_laplace: n_samples must be >= 2");
    auto stream = source.make_stream(derive_seed(seed, {{"converse-laplace", 0}}));
    const int n_dim = source.dimension();
    const double nd = static_cast<double>(n_dim);
    std::vector<double> x(n_dim);
    std::vector<std::vector<double>> samples(lambdas.size(),
                                             std::vector<double>(n_samples));
    for (std::int64_t t = 0; t < n_samples; ++t) {
        stream->next(x);
        const double s = squared_norm(x) / nd;
        for (std::size_t li = 0; li < lambdas.size(); ++li) {
            samples[li][t] = std::exp(-lambdas[li] * s);
        }
    }
    std::vector<LaplacePoint> out(lambdas.size());
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
        auto& pt = out[li];
        pt.lambda = lambdas[li];
        pt.lhs = mean(samples[li]);
        pt.rhs = std::exp(-lambdas[li] * rho_target);
        pt.gap = pt.lhs - pt.rhs;
        pt.se = standard_error(samples[li]);
    }
    return out;
}

}  // namespace projlab::verify
