#pragma once

#include <Eigen/Dense>

#include "projlab/errors.hpp"

namespace projlab::rs {

// m x m matrix with common diagonal value rho and common off-diagonal
// value q, stored parametrically. Densify on demand; all operations on
// the family have closed forms through the rank-one structure
// rho*I + q*(11^T - I).
struct RsMatrix {
    int m = 1;
    double rho = 1.0;
    double q = 0.0;
};

RsMatrix rs_build(int m, double rho, double q);

Eigen::MatrixXd densify(const RsMatrix& r);

// Positive definite iff rho - q > 0 and rho + (m-1) q > 0.
bool positive_definite(const RsMatrix& r);

// Spectrum: `top` on the normalized all-ones direction (multiplicity 1),
// `rest` on its orthogonal complement (multiplicity m-1).
struct RsEigvals {
    double top = 0.0;   // rho + (m-1) q
    double rest = 0.0;  // rho - q
    int rest_multiplicity = 0;
};

RsEigvals rs_eigvals(const RsMatrix& r);

// Closed-form inverse; the result is again replica-symmetric.
// Throws SingularMatrix unless positive definite.
RsMatrix rs_inverse(const RsMatrix& r);

// Sigma = R^{2p}_{rho,q} (x) I_k, kept as (base, k).
struct KronCovariance {
    RsMatrix base;  // order 2p
    int k = 1;
};

Eigen::MatrixXd densify(const KronCovariance& s);

// Symmetric positive-definite square root of densify(s), built from the
// two-eigenvalue structure of the base and Kronecker-extended by I_k.
Eigen::MatrixXd sigma_sqrt(const KronCovariance& s);

// Replica-symmetric square root of the base alone (A with A*A = R).
RsMatrix rs_sqrt(const RsMatrix& r);

// ||Sigma^{-1/2}||_op = 1/sqrt(rho - q), independent of p and k.
// Requires 0 <= q < rho.
double sigma_inv_sqrt_opnorm(double rho, double q);

}  // namespace projlab::rs
