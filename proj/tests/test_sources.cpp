#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "projlab/sources.hpp"
#include "projlab/stats.hpp"

using namespace projlab;
using namespace projlab::sources;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("product source has the declared coordinate moments") {
    const double rho = 2.0, q = 1.0;
    for (const auto base : {ProductBase::gaussian, ProductBase::rademacher_shifted,
                            ProductBase::uniform_shifted}) {
        auto src = subgaussian_product(50, rho, q, base);
        CHECK(src->rho() == rho);
        CHECK(src->q() == q);
        const auto mean_vec = src->mean_vector();
        REQUIRE(mean_vec.has_value());
        for (const double m : *mean_vec) CHECK(m == doctest::Approx(std::sqrt(q)));

        Rng rng(5 + static_cast<int>(base));
        std::vector<double> x(50);
        OnlineMoments coord, coord_sq;
        for (int t = 0; t < 4000; ++t) {
            src->draw(x, rng);
            for (const double v : x) {
                coord.add(v);
                coord_sq.add(v * v);
            }
        }
        CHECK(std::abs(coord.zscore(std::sqrt(q))) < 4.0);
        // E x^2 = q + (rho - q) = rho.
        CHECK(std::abs(coord_sq.zscore(rho)) < 4.0);
    }
}

TEST_CASE("product source rejects degenerate targets") {
    CHECK_THROWS_AS(subgaussian_product(10, 1.0, 1.0, ProductBase::gaussian), DomainError);
    CHECK_THROWS_AS(subgaussian_product(10, 1.0, -0.1, ProductBase::gaussian), DomainError);
    CHECK_THROWS_AS(subgaussian_product(0, 1.0, 0.0, ProductBase::gaussian), DomainError);
}

TEST_CASE("thin-shell statistic concentrates at rho = 2") {
    auto src = subgaussian_product(200, 2.0, 1.0, ProductBase::gaussian);
    Rng rng(11);
    std::vector<double> x(200);
    OnlineMoments shell;
    for (int t = 0; t < 10000; ++t) {
        src->draw(x, rng);
        double s = 0.0;
        for (const double v : x) s += v * v;
        shell.add(s / 200.0);
    }
    CHECK(std::abs(shell.zscore(2.0)) < 4.0);
}

TEST_CASE("replicas are uncorrelated coordinate-wise for product sources") {
    auto src = subgaussian_product(20, 1.0, 0.25, ProductBase::gaussian);
    auto pairs = src->make_pair_stream(99);
    std::vector<double> x1(20), x2(20);
    OnlineMoments cross;
    const double mean_sq = 0.25;  // (E x_1)^2 = q
    for (int t = 0; t < 20000; ++t) {
        pairs->next(x1, x2);
        cross.add(x1[0] * x2[0] - mean_sq);
    }
    CHECK(std::abs(cross.zscore(0.0)) < 4.0);
}

TEST_CASE("spiked source exposes spectrum-derived targets") {
    const int n = 100;
    std::vector<double> spectrum(n, 1.0);
    auto iso = spiked_gaussian(spectrum, std::vector<double>(n, 0.0));
    CHECK(iso->rho() == doctest::Approx(1.0));
    CHECK(iso->q() == 0.0);

    spectrum[0] = std::sqrt(static_cast<double>(n));
    auto spiked = spiked_gaussian(spectrum, std::vector<double>(n, 0.0));
    CHECK(spiked->rho() == doctest::Approx((std::sqrt(100.0) + 99.0) / 100.0));
    CHECK(spiked->q() == 0.0);

    CHECK_THROWS_AS(spiked_gaussian({1.0, -1.0}, {0.0, 0.0}), DomainError);
    CHECK_THROWS_AS(spiked_gaussian({1.0}, {0.0, 0.0}), DomainError);
}

TEST_CASE("zero spectrum gives a point mass") {
    std::vector<double> mean = {3.0, -1.0, 0.5};
    auto src = spiked_gaussian(std::vector<double>(3, 0.0), mean);
    Rng rng(13);
    std::vector<double> x(3);
    for (int t = 0; t < 10; ++t) {
        src->draw(x, rng);
        CHECK(x == mean);
    }
    // rho = |mu|^2/N = q for a point mass.
    CHECK(src->rho() == doctest::Approx(src->q()));
}

TEST_CASE("overlap variance obeys the covariance-eigenvalue bound") {
    // c2 <= |lambda|^2/N^2 + (2/N) max(lambda) q_N, checked on sources
    // with a known spectrum, including the sqrt(N)-spiked one.
    struct Case {
        std::unique_ptr<VectorSource> src;
        double lambda_sq_sum;
        double lambda_max;
    };
    const int n = 256;
    std::vector<double> spiked_spectrum(n, 1.0);
    spiked_spectrum[0] = std::sqrt(static_cast<double>(n));
    std::vector<Case> cases;
    cases.push_back({subgaussian_product(n, 1.0, 0.25, ProductBase::gaussian),
                     n * 0.75 * 0.75, 0.75});
    cases.push_back({spiked_gaussian(spiked_spectrum, std::vector<double>(n, 0.0)),
                     std::sqrt(double(n)) * std::sqrt(double(n)) + (n - 1), std::sqrt(double(n))});

    std::uint64_t seed = 400;
    for (const auto& c : cases) {
        auto pairs = c.src->make_pair_stream(seed++);
        std::vector<double> x1(n), x2(n);
        OnlineMoments c2_stat;
        const double q_n = c.src->q();
        for (int t = 0; t < 4000; ++t) {
            pairs->next(x1, x2);
            double ov = 0.0;
            for (int i = 0; i < n; ++i) ov += x1[i] * x2[i];
            const double d = ov / n - q_n;
            c2_stat.add(d * d);
        }
        const double bound = c.lambda_sq_sum / (double(n) * n) + 2.0 / n * c.lambda_max * q_n;
        CHECK(c2_stat.mean() <= bound + 4.0 * c2_stat.se());
        // And the rate is genuinely O(1/N): N * c2 stays of order one.
        CHECK(n * c2_stat.mean() < 3.0);
    }
}

TEST_CASE("override_targets changes only the declared constants") {
    auto inner = spiked_gaussian(std::vector<double>(4, 0.0), {1.0, 1.0, 1.0, 1.0});
    auto wrapped = override_targets(std::move(inner), 2.0, 1.0);
    CHECK(wrapped->rho() == 2.0);
    CHECK(wrapped->q() == 1.0);
    Rng rng(1);
    std::vector<double> x(4);
    wrapped->draw(x, rng);
    CHECK(x == std::vector<double>{1.0, 1.0, 1.0, 1.0});
    CHECK_THROWS_AS(override_targets(spiked_gaussian({1.0}, {0.0}), 1.0, 1.5), DomainError);
}

TEST_CASE("sk model construction and coupling symmetry") {
    const auto model = make_sk_model(8, 0.3, 0.1, 555);
    CHECK(model.couplings.size() == 28);
    CHECK(model.coupling(2, 5) == model.coupling(5, 2));
    CHECK(model.coupling(3, 3) == 0.0);
    CHECK_THROWS_AS(make_sk_model(1, 0.3, 0.0, 1), DomainError);
    CHECK_THROWS_AS(make_sk_model(8, -0.1, 0.0, 1), DomainError);
}

TEST_CASE("disorder binary format round-trips and has the documented header") {
    const auto model = make_sk_model(11, 0.25, 0.2, 777);
    const std::string path = temp_path("projlab_disorder_test.skdz");
    save_disorder(path, model);

    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    char magic[4];
    in.read(magic, 4);
    CHECK(std::string(magic, 4) == "SKDZ");
    unsigned char rest[12];
    in.read(reinterpret_cast<char*>(rest), 12);
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(rest[i]) << (8 * i);
    CHECK(n == 11);
    std::uint64_t seed = 0;
    for (int i = 0; i < 8; ++i) seed |= static_cast<std::uint64_t>(rest[4 + i]) << (8 * i);
    CHECK(seed == 777);
    in.seekg(0, std::ios::end);
    CHECK(static_cast<std::size_t>(in.tellg()) == 16 + 8 * model.couplings.size());
    in.close();

    const auto loaded = load_disorder(path, model.beta, model.h);
    CHECK(loaded.n == model.n);
    CHECK(loaded.disorder_seed == model.disorder_seed);
    CHECK(loaded.couplings == model.couplings);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(load_disorder(temp_path("projlab_missing.skdz"), 0.3, 0.1), IoError);
    const std::string bad = temp_path("projlab_bad_magic.skdz");
    {
        std::ofstream out(bad, std::ios::binary);
        out << "NOPE" << std::string(20, '\0');
    }
    CHECK_THROWS_AS(load_disorder(bad, 0.3, 0.1), IoError);
    std::filesystem::remove(bad);
}

TEST_CASE("non-interacting chain matches the product law") {
    // beta = 0: coordinates iid with P(x_i = 1) = e^h/(e^h + e^{-h}).
    const double h = 0.4;
    auto model = make_sk_model(64, 0.0, h, 31);
    SkGlauberSource src(std::move(model), 50, 2);
    auto stream = src.make_stream(17);
    std::vector<double> x(64);
    OnlineMoments mag;
    for (int t = 0; t < 800; ++t) {
        stream->next(x);
        for (const double s : x) mag.add(s);
    }
    // Samples are weakly dependent across sweeps; widen the iid SE by 2.
    CHECK(std::abs(mag.mean() - std::tanh(h)) < 8.0 * mag.se());
}

TEST_CASE("sk spins have unit thin-shell statistic exactly") {
    auto model = make_sk_model(128, 0.3, 0.3, 99);
    SkGlauberSource src(std::move(model), 50, 5);
    Rng rng(5);
    std::vector<double> x(128);
    for (int t = 0; t < 5; ++t) {
        src.draw(x, rng);
        double s = 0.0;
        for (const double v : x) {
            CHECK(std::abs(v) == 1.0);
            s += v * v;
        }
        CHECK(s / 128.0 == 1.0);  // exact
    }
    CHECK(src.rho() == 1.0);
}

TEST_CASE("zero field gives zero magnetization") {
    auto model = make_sk_model(64, 0.3, 0.0, 41);
    SkGlauberSource src(std::move(model), 100, 5);
    auto stream = src.make_stream(21);
    std::vector<double> x(64);
    OnlineMoments mag;
    for (int t = 0; t < 1500; ++t) {
        stream->next(x);
        double m = 0.0;
        for (const double s : x) m += s;
        mag.add(m / 64.0);
    }
    CHECK(std::abs(mag.mean()) < 8.0 * mag.se());
}

TEST_CASE("pair stream runs two distinct chains on shared disorder") {
    auto model = make_sk_model(32, 0.3, 0.3, 3);
    SkGlauberSource src(std::move(model), 30, 3);
    auto a = src.make_pair_stream(123);
    auto b = src.make_pair_stream(123);
    std::vector<double> x1(32), x2(32), y1(32), y2(32);
    a->next(x1, x2);
    b->next(y1, y2);
    CHECK(x1 == y1);  // deterministic given the stream seed
    CHECK(x2 == y2);
    CHECK(x1 != x2);  // the two chains are independent
    CHECK_THROWS_AS(SkGlauberSource(make_sk_model(8, 0.1, 0.0, 1), 0, 1), DomainError);
}

TEST_CASE("sk replicas are independent given the disorder") {
    // Cross moment of one coordinate across the two chains equals the
    // squared sitewise Gibbs mean for that coordinate.
    auto model = make_sk_model(32, 0.25, 0.6, 13);
    SkGlauberSource src(std::move(model), 80, 4);
    auto pairs = src.make_pair_stream(271);
    std::vector<double> x1(32), x2(32);
    OnlineMoments cross, site_mean;
    for (int t = 0; t < 6000; ++t) {
        pairs->next(x1, x2);
        cross.add(x1[0] * x2[0]);
        site_mean.add(x1[0]);
        site_mean.add(x2[0]);
    }
    const double target = site_mean.mean() * site_mean.mean();
    // Thinning leaves weak in-chain correlation; widen the iid SE.
    CHECK(std::abs(cross.mean() - target) < 8.0 * (cross.se() + 2.0 * site_mean.se()));
}

TEST_CASE("estimated mean is consistent with the field direction") {
    auto model = make_sk_model(48, 0.2, 0.5, 7);
    SkGlauberSource src(std::move(model), 100, 3);
    const auto mean = src.estimate_mean(1500, 77);
    REQUIRE(mean.size() == 48);
    double avg = 0.0;
    for (const double m : mean) avg += m;
    avg /= 48.0;
    // Positive field: strongly positive sitewise means.
    CHECK(avg > 0.2);
    CHECK(!src.mean_vector().has_value());
}

TEST_CASE("gauss_hermite_expect integrates exactly against known moments") {
    CHECK(gauss_hermite_expect([](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(gauss_hermite_expect([](double z) { return z; }) ==
          doctest::Approx(0.0).epsilon(1e-13));
    CHECK(gauss_hermite_expect([](double z) { return z * z; }) ==
          doctest::Approx(1.0).epsilon(1e-13));
    CHECK(gauss_hermite_expect([](double z) { return z * z * z * z; }) ==
          doctest::Approx(3.0).epsilon(1e-12));
    // E cos(Z) = exp(-1/2).
    CHECK(gauss_hermite_expect([](double z) { return std::cos(z); }) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("sk_fixed_point closed cases") {
    CHECK(sk_fixed_point(0.7, 0.0) == 0.0);
    CHECK(sk_fixed_point(0.0, 1.0) ==
          doctest::Approx(std::tanh(1.0) * std::tanh(1.0)).epsilon(1e-12));
    CHECK_THROWS_AS(sk_fixed_point(-0.5, 0.0), DomainError);
}

TEST_CASE("sk_fixed_point matches an independent bisection solver") {
    const double beta = 0.3, h = 0.5;
    const double q_iter = sk_fixed_point(beta, h);
    // Bisection on f(q) = E tanh^2(beta sqrt(q) z + h) - q over [0, 1].
    const auto f = [&](double q) {
        return gauss_hermite_expect([&](double z) {
                   const double t = std::tanh(beta * std::sqrt(q) * z + h);
                   return t * t;
               }) - q;
    };
    double lo = 0.0, hi = 1.0;
    REQUIRE(f(lo) > 0.0);
    REQUIRE(f(hi) < 0.0);
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    CHECK(std::abs(q_iter - 0.5 * (lo + hi)) < 1e-10);
}
