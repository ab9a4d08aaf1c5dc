#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "projlab/errors.hpp"
#include "projlab/rng.hpp"

namespace projlab::metrics {

// n samples in R^k, row-major.
struct Cloud {
    int n = 0;
    int k = 1;
    std::vector<double> data;

    std::span<const double> row(int i) const {
        return std::span<const double>(data).subspan(static_cast<std::size_t>(i) * k, k);
    }
};

// Exact W1 between two equal-size empirical measures on R: the mean
// absolute difference of order statistics. Throws LengthMismatch.
double w1_1d(std::span<const double> a, std::span<const double> b);

// Exact W1 between equal-size empirical measures on R^k: minimum-cost
// perfect matching under Euclidean cost, divided by n. Cubic time;
// throws SizeLimit above n = 2048 and LengthMismatch on shape mismatch.
double w1_exact_kd(const Cloud& a, const Cloud& b);

// Minimum-cost perfect matching value of a dense n x n cost matrix
// (row-major), by shortest augmenting paths with potentials.
double assignment_min_cost(std::span<const double> cost, int n);

// A bounded Lipschitz test function with declared constants.
struct TestFunction {
    std::string id;
    double lip = 1.0;  // L
    double sup = 1.0;  // M
    std::function<double(std::span<const double>)> eval;
};

// Deterministic finite surrogate for the sup over the (L, M) BL ball:
// coordinate maps clamped to [-M, M], seeded tanh ridges, and pairwise
// products renormalized by the product-Lipschitz constant.
struct TestCatalog {
    int k = 1;
    double lip = 1.0;
    double sup = 1.0;
    std::uint64_t seed = 0;
    std::vector<TestFunction> members;
};

TestCatalog make_catalog(int k, double lip, double sup, int count, std::uint64_t seed);

// Empirical validation of the declared constants: Lipschitz quotients
// over `trials` random pairs must not exceed L(1 + 1e-9) and every
// evaluation must stay within [-M, M]. Throws DomainError on violation.
void validate_test_function(const TestFunction& g, int k, int trials, Rng& rng);

struct BlSupResult {
    double value = 0.0;
    std::string attaining_id;
};

// max over the catalog of |mean_a g - mean_b g|; a lower bound for the
// true BL distance by construction.
BlSupResult bl_sup(const Cloud& a, const Cloud& b, const TestCatalog& catalog);

struct LipschitzProductReport {
    int r = 1;
    double bound = 0.0;         // r L M^{r-1}
    double max_quotient = 0.0;  // worst empirical quotient seen
    std::int64_t trials = 0;
    bool ok = false;
};

// Empirical check that F_r(x_1..x_r) = g(x_1)...g(x_r) on R^{kr} has
// Lipschitz constant at most r L M^{r-1}.
LipschitzProductReport lipschitz_product_check(const TestFunction& g, int k, int r,
                                               std::int64_t trials, Rng& rng);

// Serializable record of a distance estimate (JSON fields: estimator,
// n, k, value, seed).
struct DistanceReport {
    std::string estimator;
    int n = 0;
    int k = 1;
    double value = 0.0;
    std::uint64_t seed = 0;

    std::string to_json() const;
};

}  // namespace projlab::metrics
