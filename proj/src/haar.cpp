#include "projlab/haar.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "projlab/stats.hpp"

namespace projlab::haar {

namespace {

// Fills `m` with iid standard Gaussians, column-major order fixed by Eigen.
void fill_gaussian(Eigen::MatrixXd& m, Rng& rng) {
    double* data = m.data();
    const Eigen::Index size = m.size();
    for (Eigen::Index i = 0; i < size; ++i) data[i] = rng.normal();
}

}  // namespace

HaarSampler::HaarSampler(int n)
    : n_(n), gauss_(n, n), q_(n, n), qr_(n, n) {
    if (n < 2) throw DomainError("sample_haar: order must be >= 2");
}

const Eigen::MatrixXd& HaarSampler::sample(Rng& rng) {
    // A standard Gaussian matrix is singular with probability zero; the
    // retry loop only guards against numerically degenerate draws.
    for (int attempt = 0; attempt < 3; ++attempt) {
        fill_gaussian(gauss_, rng);
        qr_.compute(gauss_);
        const auto& qr_mat = qr_.matrixQR();
        double min_diag = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n_; ++j) min_diag = std::min(min_diag, std::abs(qr_mat(j, j)));
        if (!(min_diag > 1e-12)) continue;
        q_.setIdentity(n_, n_);
        q_.applyOnTheLeft(qr_.householderQ());
        // Sign convention: make the R diagonal positive, column by column.
        for (int j = 0; j < n_; ++j) {
            if (qr_mat(j, j) < 0.0) q_.col(j) = -q_.col(j);
        }
        return q_;
    }
    throw DegenerateDraw("sample_haar: Gaussian matrix numerically rank-deficient after 3 attempts");
}

Eigen::MatrixXd sample_haar(int n, Rng& rng) {
    HaarSampler sampler(n);
    return sampler.sample(rng);
}

double haar_moment_oracle(int n, const MomentPattern& pattern) {
    const std::size_t degree = pattern.factors.size();
    if (degree != 1 && degree != 2 && degree != 4) {
        throw UnsupportedPattern("haar_moment_oracle: degree must be 1, 2 or 4, got " +
                                 std::to_string(degree));
    }
    std::map<int, int> row_count, col_count;
    std::map<std::pair<int, int>, int> entry_count;
    for (const auto& [i, j] : pattern.factors) {
        if (i < 1 || i > n || j < 1 || j > n) {
            throw IndexError("haar_moment_oracle: index out of range [1, n]");
        }
        ++row_count[i];
        ++col_count[j];
        ++entry_count[{i, j}];
    }
    // Point 6: any row or column with an odd number of factors kills the
    // moment (this also covers all degree-1 patterns).
    for (const auto& [r, c] : row_count) {
        (void)r;
        if (c % 2 != 0) return 0.0;
    }
    for (const auto& [r, c] : col_count) {
        (void)r;
        if (c % 2 != 0) return 0.0;
    }
    const double nd = static_cast<double>(n);
    if (degree == 2) {
        // Even counts at degree 2 force a single squared entry.
        return 1.0 / nd;
    }
    if (entry_count.size() == 1) {
        // E[u_ij^4] is not among the classified cases.
        throw UnsupportedPattern("haar_moment_oracle: single entry to the 4th power is not classified");
    }
    if (entry_count.size() == 2) {
        // Two squared entries: same row/column or fully disjoint.
        const auto a = entry_count.begin()->first;
        const auto b = std::next(entry_count.begin())->first;
        if (a.first == b.first || a.second == b.second) {
            return 1.0 / (nd * (nd + 2.0));
        }
        return (nd + 1.0) / ((nd - 1.0) * nd * (nd + 2.0));
    }
    // Four distinct entries with even row/column counts form a 2x2 minor.
    return -1.0 / ((nd - 1.0) * nd * (nd + 2.0));
}

double minor_covariance_oracle(int n, int i, int k, int j, int l,
                               bool independent_matrices) {
    for (int idx : {i, k, j, l}) {
        if (idx < 1 || idx > n) throw IndexError("minor_covariance_oracle: index out of range [1, n]");
    }
    if (i == k || j == l) {
        throw IndexError("minor_covariance_oracle: requires i != k and j != l");
    }
    if (independent_matrices) return 0.0;
    const double nd = static_cast<double>(n);
    const double d_ij = (i == j) ? 1.0 : 0.0;
    const double d_kl = (k == l) ? 1.0 : 0.0;
    const double d_il = (i == l) ? 1.0 : 0.0;
    const double d_kj = (k == j) ? 1.0 : 0.0;
    return 2.0 / (nd * (nd - 1.0)) * (d_ij * d_kl - d_il * d_kj);
}

namespace {

// Draws a uniformly random orthonormal 2-frame (the first two columns of
// a Haar matrix) by Gram-Schmidt on two Gaussian vectors, with one
// reorthogonalization pass.
void sample_two_frame(int n, Rng& rng, std::vector<double>& v1, std::vector<double>& v2) {
    v1.resize(n);
    v2.resize(n);
    for (;;) {
        double n1 = 0.0;
        for (int i = 0; i < n; ++i) {
            v1[i] = rng.normal();
            n1 += v1[i] * v1[i];
        }
        n1 = std::sqrt(n1);
        if (n1 < 1e-150) continue;
        for (int i = 0; i < n; ++i) v1[i] /= n1;
        for (int i = 0; i < n; ++i) v2[i] = rng.normal();
        for (int pass = 0; pass < 2; ++pass) {
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += v1[i] * v2[i];
            for (int i = 0; i < n; ++i) v2[i] -= dot * v1[i];
        }
        double n2 = 0.0;
        for (int i = 0; i < n; ++i) n2 += v2[i] * v2[i];
        n2 = std::sqrt(n2);
        if (n2 < 1e-150) continue;
        for (int i = 0; i < n; ++i) v2[i] /= n2;
        return;
    }
}

}  // namespace

std::vector<double> rotate_random_plane(const std::vector<double>& theta,
                                        double epsilon, Rng& rng) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw DomainError("rotate_random_plane: epsilon must lie in (0, 1)");
    }
    const int n = static_cast<int>(theta.size());
    if (n < 2) throw DomainError("rotate_random_plane: dimension must be >= 2");
    thread_local std::vector<double> v1, v2;
    sample_two_frame(n, rng, v1, v2);
    double t1 = 0.0, t2 = 0.0;
    for (int i = 0; i < n; ++i) {
        t1 += v1[i] * theta[i];
        t2 += v2[i] * theta[i];
    }
    const double c = std::sqrt(1.0 - epsilon * epsilon);
    // (B - I) applied to the frame coordinates, B the plane rotation.
    const double w1 = (c - 1.0) * t1 + epsilon * t2;
    const double w2 = -epsilon * t1 + (c - 1.0) * t2;
    std::vector<double> out(theta);
    for (int i = 0; i < n; ++i) out[i] += w1 * v1[i] + w2 * v2[i];
    return out;
}

DriftReport drift_check(int n, double epsilon, std::int64_t n_samples, Rng& rng) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw DomainError("drift_check: epsilon must lie in (0, 1)");
    }
    std::vector<double> theta(n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < n; ++i) theta[i] = scale * rng.normal();

    std::vector<OnlineMoments> delta(n);
    std::vector<double> v1, v2;
    for (std::int64_t s = 0; s < n_samples; ++s) {
        sample_two_frame(n, rng, v1, v2);
        double t1 = 0.0, t2 = 0.0;
        for (int i = 0; i < n; ++i) {
            t1 += v1[i] * theta[i];
            t2 += v2[i] * theta[i];
        }
        const double c = std::sqrt(1.0 - epsilon * epsilon);
        const double w1 = (c - 1.0) * t1 + epsilon * t2;
        const double w2 = -epsilon * t1 + (c - 1.0) * t2;
        for (int i = 0; i < n; ++i) delta[i].add(w1 * v1[i] + w2 * v2[i]);
    }

    DriftReport report;
    report.n = n;
    report.epsilon = epsilon;
    report.n_samples = n_samples;
    report.z.resize(n);
    const double scaling = static_cast<double>(n) / (epsilon * epsilon);
    for (int i = 0; i < n; ++i) {
        const double est = scaling * delta[i].mean();
        const double se = scaling * delta[i].se();
        report.z[i] = (est - (-theta[i])) / se;
        report.max_abs_z = std::max(report.max_abs_z, std::abs(report.z[i]));
    }
    report.bias_exceeds_3se = report.max_abs_z > 3.0;
    return report;
}

}  // namespace projlab::haar
