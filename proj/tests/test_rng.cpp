#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "projlab/parallel.hpp"
#include "projlab/rng.hpp"
#include "projlab/stats.hpp"

using namespace projlab;

TEST_CASE("same seed reproduces the full stream") {
    Rng a(991), b(991);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.normal() == b.normal());
        CHECK(a.uniform01() == b.uniform01());
    }
}

TEST_CASE("uniform01 stays in [0, 1)") {
    Rng rng(5);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("uniform_index is in range and hits all values") {
    Rng rng(7);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = rng.uniform_index(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("normal moments match a standard Gaussian") {
    Rng rng(17);
    const int n = 400000;
    OnlineMoments m1, m2;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        m1.add(z);
        m2.add(z * z);
    }
    CHECK(std::abs(m1.zscore(0.0)) < 4.0);
    CHECK(std::abs(m2.zscore(1.0)) < 4.0);
}

TEST_CASE("derive_seed is deterministic and path-sensitive") {
    const auto s1 = derive_seed(42, {{"alpha", 1}, {"beta", 2}});
    const auto s2 = derive_seed(42, {{"alpha", 1}, {"beta", 2}});
    CHECK(s1 == s2);
    // Order matters.
    CHECK(derive_seed(42, {{"alpha", 1}, {"beta", 2}}) !=
          derive_seed(42, {{"beta", 2}, {"alpha", 1}}));
    // Label matters even with equal indices.
    CHECK(derive_seed(42, {{"outer", 3}}) != derive_seed(42, {{"inner", 3}}));
    // Master matters.
    CHECK(derive_seed(42, {{"outer", 3}}) != derive_seed(43, {{"outer", 3}}));
}

TEST_CASE("derive_seed has no collisions over a million distinct paths") {
    std::set<std::uint64_t> seen;
    const char* labels[] = {"outer", "inner", "chunk", "disorder"};
    for (std::uint64_t label_idx = 0; label_idx < 4; ++label_idx) {
        for (std::uint64_t i = 0; i < 250000; ++i) {
            seen.insert(derive_seed(20240809, {{labels[label_idx], i}}));
        }
    }
    CHECK(seen.size() == 1000000);
}

TEST_CASE("parallel_for fills every slot identically at any thread count") {
    const std::size_t n = 5000;
    std::vector<double> out1(n, 0.0), out4(n, 0.0);
    auto work = [](std::size_t i) {
        Rng rng(derive_seed(9, {{"item", i}}));
        return rng.normal() + static_cast<double>(i);
    };
    parallel_for(n, 1, [&](std::size_t i) { out1[i] = work(i); });
    parallel_for(n, 4, [&](std::size_t i) { out4[i] = work(i); });
    CHECK(out1 == out4);
}

TEST_CASE("parallel_for propagates worker exceptions") {
    CHECK_THROWS_AS(parallel_for(100, 4,
                                 [](std::size_t i) {
                                     if (i == 57) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}

TEST_CASE("pairwise_sum matches plain summation") {
    Rng rng(3);
    std::vector<double> xs(1537);
    long double direct = 0.0;
    for (auto& x : xs) {
        x = rng.uniform(-1.0, 1.0);
        direct += x;
    }
    CHECK(pairwise_sum(xs) == doctest::Approx(static_cast<double>(direct)).epsilon(1e-12));
    CHECK(pairwise_sum(std::span<const double>{}) == 0.0);
}

TEST_CASE("least_squares recovers an exact line") {
    std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
    std::vector<double> y = {-1.0, -3.0, -5.0, -7.0};
    const auto fit = least_squares(x, y);
    CHECK(fit.slope == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("jackknife SE of the centered second moment is sane") {
    Rng rng(23);
    std::vector<double> xs(4000);
    for (auto& x : xs) x = rng.normal();
    const double se = jackknife_se_central_m2(xs);
    // The sample variance of N(0,1) has variance about 2/n.
    CHECK(se > 0.5 * std::sqrt(2.0 / 4000.0));
    CHECK(se < 2.0 * std::sqrt(2.0 / 4000.0));
}
