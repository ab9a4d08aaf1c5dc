#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "projlab/errors.hpp"
#include "projlab/rng.hpp"

namespace projlab::haar {

// Exact Haar draw on the orthogonal group O(n): orthonormalization of an
// iid standard-Gaussian matrix via Householder QR, with the column signs
// fixed so the triangular factor has positive diagonal. Without that sign
// convention the output is NOT Haar distributed.
// Throws DegenerateDraw if the Gaussian matrix is numerically
// rank-deficient three times in a row.
Eigen::MatrixXd sample_haar(int n, Rng& rng);

// Reusable sampler that amortizes QR workspace across draws.
class HaarSampler {
  public:
    explicit HaarSampler(int n);
    // The returned reference is valid until the next call.
    const Eigen::MatrixXd& sample(Rng& rng);

  private:
    int n_;
    Eigen::MatrixXd gauss_;
    Eigen::MatrixXd q_;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
};

// A monomial in matrix entries: product over (row, col) factors,
// 1-based indices, degree 1, 2 or 4.
struct MomentPattern {
    std::vector<std::pair<int, int>> factors;
};

// Closed-form E[prod u_{ij}] for the classified degree-1/2/4 patterns:
//   0                          any row or column with an odd factor count
//   1/n                        u_ij^2
//   1/(n(n+2))                 u_ij^2 u_ij'^2 (same row) or same column
//   (n+1)/((n-1)n(n+2))        u_ij^2 u_i'j'^2, i != i', j != j'
//   -1/((n-1)n(n+2))           u_ij u_ij' u_i'j u_i'j' (2x2 minor)
// Throws UnsupportedPattern for degree-4 patterns outside these cases
// (e.g. a single entry to the fourth power) and IndexError for indices
// outside [1, n].
double haar_moment_oracle(int n, const MomentPattern& pattern);

// E[(u_i1 u_k2 - u_i2 u_k1)(u_j1 u_l2 - u_j2 u_l1)]
//   = (2/(n(n-1))) (delta_ij delta_kl - delta_il delta_kj),
// for i != k, j != l, 1-based. With independent_matrices the two minors
// come from independent Haar draws and the covariance is identically 0.
double minor_covariance_oracle(int n, int i, int k, int j, int l,
                               bool independent_matrices = false);

// theta -> U A_eps U^T theta for a fresh Haar U, where A_eps rotates the
// first two coordinates clockwise by arcsin(eps). Only a uniform
// two-frame of U is ever needed, so the cost is O(n) per call.
// Preserves the Euclidean norm to machine precision.
std::vector<double> rotate_random_plane(const std::vector<double>& theta,
                                        double epsilon, Rng& rng);

struct DriftReport {
    int n = 0;
    double epsilon = 0.0;
    std::int64_t n_samples = 0;
    // Componentwise z-scores of the Monte Carlo estimate of
    // (n/eps^2) E[theta_eps - theta | theta] against -theta.
    std::vector<double> z;
    double max_abs_z = 0.0;
    // Set when the largest componentwise deviation exceeds 3 standard
    // errors; at small eps this indicates a seed-level fluke, at large
    // eps the O(eps) remainder of the drift expansion.
    bool bias_exceeds_3se = false;
};

// Monte Carlo check of the infinitesimal drift relation: theta is drawn
// once from N(0, I/n), then n_samples independent plane rotations
// estimate (n/eps^2) E[theta_eps - theta | theta], which should match
// -theta up to an O(eps) remainder. eps <= 0.05 keeps that remainder
// below the statistical noise at the sample counts used here.
DriftReport drift_check(int n, double epsilon, std::int64_t n_samples, Rng& rng);

}  // namespace projlab::haar
