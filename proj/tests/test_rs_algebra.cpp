#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "projlab/rng.hpp"
#include "projlab/rs_algebra.hpp"

using namespace projlab;
using namespace projlab::rs;

namespace {

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

// Draws a random positive-definite instance with m in [2, 16].
RsMatrix random_pd_instance(Rng& rng) {
    for (;;) {
        const int m = 2 + static_cast<int>(rng.uniform_index(15));
        const double rho = rng.uniform(0.5, 3.0);
        const double q = rng.uniform(-rho / (m - 1) * 0.95, rho * 0.95);
        const RsMatrix r = rs_build(m, rho, q);
        if (positive_definite(r)) return r;
    }
}

}  // namespace

TEST_CASE("rs_build densifies to the constant-diagonal pattern") {
    const auto dense = densify(rs_build(3, 2.0, 1.0));
    Eigen::MatrixXd expected(3, 3);
    expected << 2, 1, 1, 1, 2, 1, 1, 1, 2;
    CHECK(max_abs_diff(dense, expected) == 0.0);

    // m = 1: the off-diagonal value is vacuous.
    const auto single = densify(rs_build(1, 5.0, 9.0));
    CHECK(single.rows() == 1);
    CHECK(single(0, 0) == 5.0);

    // q = 0 is a scaled identity.
    CHECK(max_abs_diff(densify(rs_build(2, 1.0, 0.0)), Eigen::MatrixXd::Identity(2, 2)) == 0.0);

    CHECK_THROWS_AS(rs_build(0, 1.0, 0.0), DomainError);
}

TEST_CASE("positive definiteness matches the eigenvalue rule") {
    Rng rng(101);
    for (int inst = 0; inst < 200; ++inst) {
        const int m = 1 + static_cast<int>(rng.uniform_index(16));
        const double rho = rng.uniform(-1.0, 3.0);
        const double q = rng.uniform(-2.0, 2.0);
        const RsMatrix r{m, rho, q};
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(densify(r));
        const bool numeric_pd = es.eigenvalues().minCoeff() > 1e-12;
        if (positive_definite(r) != numeric_pd) {
            // Allow disagreement only at the numerical boundary.
            CHECK(std::abs(es.eigenvalues().minCoeff()) < 1e-9);
        }
    }
}

TEST_CASE("rs_eigvals closed forms") {
    const auto ev1 = rs_eigvals(rs_build(4, 1.0, 0.5));
    CHECK(ev1.top == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(ev1.rest == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ev1.rest_multiplicity == 3);

    const auto ev2 = rs_eigvals(rs_build(2, 1.0, 0.0));
    CHECK(ev2.top == 1.0);
    CHECK(ev2.rest == 1.0);

    const auto ev3 = rs_eigvals(rs_build(6, 2.0, -0.1));
    CHECK(ev3.top == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(ev3.rest == doctest::Approx(2.1).epsilon(1e-15));
}

TEST_CASE("rs_eigvals matches a dense eigensolver to 1e-12") {
    Rng rng(202);
    for (int inst = 0; inst < 100; ++inst) {
        const auto r = random_pd_instance(rng);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(densify(r));
        const auto ev = rs_eigvals(r);
        // Dense eigenvalues sorted ascending: compare the extremes and
        // count multiplicities via the two distinct closed-form values.
        const double lo = std::min(ev.top, ev.rest);
        const double hi = std::max(ev.top, ev.rest);
        CHECK(std::abs(es.eigenvalues().minCoeff() - lo) < 1e-12);
        CHECK(std::abs(es.eigenvalues().maxCoeff() - hi) < 1e-12);
        // The all-ones direction carries the `top` eigenvalue.
        Eigen::VectorXd ones = Eigen::VectorXd::Constant(r.m, 1.0 / std::sqrt(double(r.m)));
        CHECK((densify(r) * ones - ev.top * ones).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("rs_inverse closed forms and error cases") {
    // Identity is self-inverse.
    const auto inv_id = rs_inverse(rs_build(2, 1.0, 0.0));
    CHECK(inv_id.rho == 1.0);
    CHECK(inv_id.q == 0.0);

    // Hand-inverted 2x2.
    const auto inv = rs_inverse(rs_build(2, 2.0, 1.0));
    CHECK(inv.rho == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(inv.q == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));

    const auto r = rs_build(4, 1.0, 0.5);
    CHECK(max_abs_diff(densify(rs_inverse(r)) * densify(r),
                       Eigen::MatrixXd::Identity(4, 4)) < 1e-12);

    CHECK_THROWS_AS(rs_inverse(rs_build(3, 1.0, 1.0)), SingularMatrix);   // rho - q = 0
    CHECK_THROWS_AS(rs_inverse(rs_build(3, 1.0, -0.5)), SingularMatrix);  // rho + 2q = 0
}

TEST_CASE("rs_inverse randomized identity and involution") {
    Rng rng(303);
    for (int inst = 0; inst < 200; ++inst) {
        const auto r = random_pd_instance(rng);
        const auto inv = rs_inverse(r);
        CHECK(max_abs_diff(densify(inv) * densify(r), Eigen::MatrixXd::Identity(r.m, r.m)) <
              1e-12);
        const auto back = rs_inverse(inv);
        CHECK(std::abs(back.rho - r.rho) < 1e-10);
        CHECK(std::abs(back.q - r.q) < 1e-10);
    }
}

TEST_CASE("negative q uses the rank-one inverse route") {
    const auto r = rs_build(6, 2.0, -0.1);
    REQUIRE(positive_definite(r));
    CHECK(max_abs_diff(densify(rs_inverse(r)) * densify(r), Eigen::MatrixXd::Identity(6, 6)) <
          1e-12);
}

TEST_CASE("KronCovariance densify has the block structure") {
    const KronCovariance sigma{rs_build(4, 1.0, 0.25), 2};
    const auto dense = densify(sigma);
    REQUIRE(dense.rows() == 8);
    for (int l = 0; l < 4; ++l) {
        for (int lp = 0; lp < 4; ++lp) {
            const Eigen::MatrixXd block = dense.block(2 * l, 2 * lp, 2, 2);
            const double v = (l == lp) ? 1.0 : 0.25;
            CHECK(max_abs_diff(block, v * Eigen::MatrixXd::Identity(2, 2)) == 0.0);
        }
    }
}

TEST_CASE("sigma_sqrt squares back to the dense covariance") {
    // Identity base.
    const auto a0 = sigma_sqrt(KronCovariance{rs_build(2, 1.0, 0.0), 1});
    CHECK(max_abs_diff(a0, Eigen::MatrixXd::Identity(2, 2)) < 1e-14);

    // 2x2 base against the numeric square-root oracle.
    const KronCovariance s1{rs_build(2, 1.0, 0.5), 1};
    const auto a1 = sigma_sqrt(s1);
    CHECK(max_abs_diff(a1 * a1, densify(s1)) < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(densify(s1));
    CHECK(max_abs_diff(a1, es.operatorSqrt()) < 1e-12);

    // Kronecker-extended case.
    const KronCovariance s2{rs_build(4, 1.0, 0.25), 2};
    const auto a2 = sigma_sqrt(s2);
    CHECK(max_abs_diff(a2 * a2, densify(s2)) < 1e-10);

    CHECK_THROWS_AS(sigma_sqrt(KronCovariance{rs_build(2, 1.0, 1.0), 1}), SingularMatrix);
}

TEST_CASE("sigma_inv_sqrt_opnorm closed form and domain") {
    CHECK(sigma_inv_sqrt_opnorm(1.0, 0.75) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(sigma_inv_sqrt_opnorm(1.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(sigma_inv_sqrt_opnorm(1.0, 1.0), DomainError);
    CHECK_THROWS_AS(sigma_inv_sqrt_opnorm(1.0, -0.1), DomainError);
}

TEST_CASE("opnorm matches the dense inverse square root for p,k in 1..3") {
    const double rho = 2.0, q = 1.0;
    for (int p = 1; p <= 3; ++p) {
        for (int k = 1; k <= 3; ++k) {
            const KronCovariance sigma{rs_build(2 * p, rho, q), k};
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(densify(sigma));
            // Largest singular value of Sigma^{-1/2} = 1/sqrt(min eig).
            const double numeric = 1.0 / std::sqrt(es.eigenvalues().minCoeff());
            CHECK(std::abs(numeric - sigma_inv_sqrt_opnorm(rho, q)) < 1e-10);
        }
    }
}
