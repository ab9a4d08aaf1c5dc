#include "projlab/rs_algebra.hpp"

#include <cmath>
#include <string>

namespace projlab::rs {

RsMatrix rs_build(int m, double rho, double q) {
    if (m < 1) throw DomainError("rs_build: order must be >= 1, got " + std::to_string(m));
    return RsMatrix{m, rho, q};
}

Eigen::MatrixXd densify(const RsMatrix& r) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Constant(r.m, r.m, r.q);
    out.diagonal().setConstant(r.rho);
    return out;
}

bool positive_definite(const RsMatrix& r) {
    // The rho - q eigenvalue has multiplicity m - 1 and is vacuous at m = 1.
    return (r.m == 1 || r.rho - r.q > 0.0) && (r.rho + (r.m - 1) * r.q > 0.0);
}

RsEigvals rs_eigvals(const RsMatrix& r) {
    RsEigvals ev;
    ev.top = r.rho + (r.m - 1) * r.q;
    ev.rest = r.rho - r.q;
    ev.rest_multiplicity = r.m - 1;
    return ev;
}

RsMatrix rs_inverse(const RsMatrix& r) {
    if (!positive_definite(r)) {
        throw SingularMatrix("rs_inverse: R^" + std::to_string(r.m) + "_{" +
                             std::to_string(r.rho) + "," + std::to_string(r.q) +
                             "} is not positive definite");
    }
    const double m = static_cast<double>(r.m);
    const double d = r.rho - r.q;
    double a, b;
    if (r.q > 0.0) {
        // Sherman-Morrison constants as printed: c = 1/q + m/(rho - q).
        const double c = 1.0 / r.q + m / d;
        a = 1.0 / d - 1.0 / (c * d * d);
        b = -1.0 / (c * d * d);
    } else if (r.q == 0.0) {
        a = 1.0 / r.rho;
        b = 0.0;
    } else {
        // Equivalent rank-one form, valid for q < 0.
        const double top = r.rho + (m - 1.0) * r.q;
        b = -r.q / (d * top);
        a = 1.0 / d + b;
    }
    return RsMatrix{r.m, a, b};
}

RsMatrix rs_sqrt(const RsMatrix& r) {
    if (!positive_definite(r)) {
        throw SingularMatrix("rs_sqrt: matrix is not positive definite");
    }
    const RsEigvals ev = rs_eigvals(r);
    const double m = static_cast<double>(r.m);
    const double st = std::sqrt(ev.top);
    const double sr = std::sqrt(ev.rest);
    // sqrt(top) on the all-ones direction, sqrt(rest) on the complement.
    return RsMatrix{r.m, (st + (m - 1.0) * sr) / m, (st - sr) / m};
}

Eigen::MatrixXd densify(const KronCovariance& s) {
    const int m = s.base.m;
    const int k = s.k;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m * k, m * k);
    const Eigen::MatrixXd block_eye = Eigen::MatrixXd::Identity(k, k);
    for (int l = 0; l < m; ++l) {
        for (int lp = 0; lp < m; ++lp) {
            const double v = (l == lp) ? s.base.rho : s.base.q;
            out.block(l * k, lp * k, k, k) = v * block_eye;
        }
    }
    return out;
}

Eigen::MatrixXd sigma_sqrt(const KronCovariance& s) {
    const RsMatrix root = rs_sqrt(s.base);  // throws SingularMatrix if not PD
    return densify(KronCovariance{root, s.k});
}

double sigma_inv_sqrt_opnorm(double rho, double q) {
    if (q < 0.0 || q >= rho) {
        throw DomainError("sigma_inv_sqrt_opnorm: requires 0 <= q < rho");
    }
    return 1.0 / std::sqrt(rho - q);
}

}  // namespace projlab::rs
