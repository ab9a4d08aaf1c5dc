#include "projlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace projlab::metrics {

double w1_1d(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw LengthMismatch("w1_1d: sample counts differ");
    if (a.empty()) throw LengthMismatch("w1_1d: empty samples");
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) acc += std::abs(sa[i] - sb[i]);
    return acc / static_cast<double>(sa.size());
}

double assignment_min_cost(std::span<const double> cost, int n) {
    // Shortest augmenting paths with row/column potentials; exact for
    // real-valued costs. 1-based internal indexing, column 0 is the
    // virtual root.
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = kInf;
            const double* row = cost.data() + static_cast<std::size_t>(i0 - 1) * n;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = row[j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (int j = 1; j <= n; ++j) {
        total += cost[static_cast<std::size_t>(p[j] - 1) * n + (j - 1)];
    }
    return total;
}

double w1_exact_kd(const Cloud& a, const Cloud& b) {
    if (a.n != b.n) throw LengthMismatch("w1_exact_kd: sample counts differ");
    if (a.k != b.k) throw LengthMismatch("w1_exact_kd: dimensions differ");
    if (a.n <= 0) throw LengthMismatch("w1_exact_kd: empty clouds");
    if (a.n > 2048) throw SizeLimit("w1_exact_kd: exact assignment limited to n <= 2048");
    const int n = a.n;
    const int k = a.k;
    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        const double* xi = a.data.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            const double* yj = b.data.data() + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int d = 0; d < k; ++d) {
                const double diff = xi[d] - yj[d];
                s += diff * diff;
            }
            cost[static_cast<std::size_t>(i) * n + j] = std::sqrt(s);
        }
    }
    return assignment_min_cost(cost, n) / static_cast<double>(n);
}

namespace {

double clamp_to(double x, double bound) { return std::max(-bound, std::min(bound, x)); }

}  // namespace

TestCatalog make_catalog(int k, double lip, double sup, int count, std::uint64_t seed) {
    if (k < 1 || count < 1) throw DomainError("make_catalog: k and count must be >= 1");
    if (!(lip > 0.0 && sup > 0.0)) throw DomainError("make_catalog: L and M must be > 0");
    TestCatalog catalog;
    catalog.k = k;
    catalog.lip = lip;
    catalog.sup = sup;
    catalog.seed = seed;
    Rng rng(derive_seed(seed, {{"catalog", static_cast<std::uint64_t>(k)}}));

    const int n_coord = std::min(k, std::max(1, count / 4));
    const int n_prod = count >= 8 ? count / 4 : 0;
    const int n_ridge = count - n_coord - std::min(n_prod, count - n_coord);

    // Coordinate maps clamped to [-M, M].
    for (int j = 0; j < n_coord && static_cast<int>(catalog.members.size()) < count; ++j) {
        TestFunction g;
        g.id = "coord_" + std::to_string(j + 1);
        g.lip = lip;
        g.sup = sup;
        g.eval = [j, lip, sup](std::span<const double> x) {
            return clamp_to(lip * x[j], sup);
        };
        catalog.members.push_back(std::move(g));
    }

    // tanh ridges: M tanh((L/M)(w.x + b)) with ||w|| <= 1.
    for (int t = 0; t < n_ridge && static_cast<int>(catalog.members.size()) < count; ++t) {
        std::vector<double> w(k);
        double norm = 0.0;
        for (auto& wi : w) {
            wi = rng.normal();
            norm += wi * wi;
        }
        norm = std::sqrt(norm);
        const double radius = rng.uniform(0.5, 1.0);
        for (auto& wi : w) wi = (norm > 0.0 ? wi / norm : 0.0) * radius;
        const double b = rng.normal() * 0.5;
        TestFunction g;
        g.id = "ridge_" + std::to_string(t + 1);
        g.lip = lip;
        g.sup = sup;
        g.eval = [w = std::move(w), b, lip, sup](std::span<const double> x) {
            double dot = b;
            for (std::size_t i = 0; i < w.size(); ++i) dot += w[i] * x[i];
            return sup * std::tanh(lip / sup * dot);
        };
        catalog.members.push_back(std::move(g));
    }

    // Pairwise products of adjacent non-product members, renormalized by
    // the r = 2 product constant 2LM so the declared (L, M) still hold.
    const int n_base = static_cast<int>(catalog.members.size());
    for (int t = 0; static_cast<int>(catalog.members.size()) < count; ++t) {
        const int i = t % n_base;
        const int j = (t + 1) % n_base;
        if (i == j) break;  // single-member catalogs take no products
        const auto& gi = catalog.members[i];
        const auto& gj = catalog.members[j];
        TestFunction g;
        g.id = "prod_" + std::to_string(i + 1) + "x" + std::to_string(j + 1);
        g.lip = lip;
        g.sup = sup;
        g.eval = [ei = gi.eval, ej = gj.eval, sup](std::span<const double> x) {
            return ei(x) * ej(x) / (2.0 * sup);
        };
        catalog.members.push_back(std::move(g));
    }

    // Every member must pass its own invariants before use.
    Rng check_rng(derive_seed(seed, {{"catalog-validate", 0}}));
    for (const auto& g : catalog.members) validate_test_function(g, k, 2000, check_rng);
    return catalog;
}

void validate_test_function(const TestFunction& g, int k, int trials, Rng& rng) {
    std::vector<double> x(k), y(k);
    const double tol = g.lip * (1.0 + 1e-9);
    for (int t = 0; t < trials; ++t) {
        for (auto& v : x) v = 2.0 * rng.normal();
        // Alternate between well-separated and near pairs; the quotient
        // is typically extremal in the small-separation limit.
        if (t % 2 == 0) {
            for (auto& v : y) v = 2.0 * rng.normal();
        } else {
            const double step = std::pow(10.0, rng.uniform(-6.0, 0.0));
            for (int i = 0; i < k; ++i) y[i] = x[i] + step * rng.normal();
        }
        const double gx = g.eval(x);
        const double gy = g.eval(y);
        if (std::abs(gx) > g.sup || std::abs(gy) > g.sup) {
            throw DomainError("validate_test_function: |" + g.id + "| exceeds declared sup bound");
        }
        double dist = 0.0;
        for (int i = 0; i < k; ++i) {
            const double d = x[i] - y[i];
            dist += d * d;
        }
        dist = std::sqrt(dist);
        if (dist == 0.0) continue;
        if (std::abs(gx - gy) / dist > tol) {
            throw DomainError("validate_test_function: " + g.id + " violates declared Lipschitz bound");
        }
    }
}

BlSupResult bl_sup(const Cloud& a, const Cloud& b, const TestCatalog& catalog) {
    if (a.k != b.k || a.k != catalog.k) throw LengthMismatch("bl_sup: dimension mismatch");
    BlSupResult best;
    best.value = -1.0;
    for (const auto& g : catalog.members) {
        double ma = 0.0;
        for (int i = 0; i < a.n; ++i) ma += g.eval(a.row(i));
        ma /= static_cast<double>(a.n);
        double mb = 0.0;
        for (int i = 0; i < b.n; ++i) mb += g.eval(b.row(i));
        mb /= static_cast<double>(b.n);
        const double v = std::abs(ma - mb);
        if (v > best.value) {
            best.value = v;
            best.attaining_id = g.id;
        }
    }
    return best;
}

LipschitzProductReport lipschitz_product_check(const TestFunction& g, int k, int r,
                                               std::int64_t trials, Rng& rng) {
    if (r < 1) throw DomainError("lipschitz_product_check: r must be >= 1");
    LipschitzProductReport report;
    report.r = r;
    report.bound = r * g.lip * std::pow(g.sup, r - 1);
    report.trials = trials;
    const int dim = k * r;
    std::vector<double> x(dim), y(dim);
    const auto product = [&](const std::vector<double>& v) {
        double acc = 1.0;
        for (int block = 0; block < r; ++block) {
            acc *= g.eval(std::span<const double>(v).subspan(static_cast<std::size_t>(block) * k, k));
        }
        return acc;
    };
    for (std::int64_t t = 0; t < trials; ++t) {
        for (auto& v : x) v = 1.5 * rng.normal();
        if (t % 2 == 0) {
            for (auto& v : y) v = 1.5 * rng.normal();
        } else {
            const double step = std::pow(10.0, rng.uniform(-6.0, 0.0));
            for (int i = 0; i < dim; ++i) y[i] = x[i] + step * rng.normal();
        }
        double dist = 0.0;
        for (int i = 0; i < dim; ++i) {
            const double d = x[i] - y[i];
            dist += d * d;
        }
        dist = std::sqrt(dist);
        if (dist == 0.0) continue;
        const double quotient = std::abs(product(x) - product(y)) / dist;
        report.max_quotient = std::max(report.max_quotient, quotient);
    }
    report.ok = report.max_quotient <= report.bound * (1.0 + 1e-9);
    return report;
}

std::string DistanceReport::to_json() const {
    nlohmann::json j;
    j["estimator"] = estimator;
    j["n"] = n;
    j["k"] = k;
    j["value"] = value;
    j["seed"] = seed;
    return j.dump();
}

}  // namespace projlab::metrics
