#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "projlab/errors.hpp"
#include "projlab/rng.hpp"
#include "projlab/sources.hpp"

namespace projlab::projection {

// N x k matrix of projection directions with iid Gaussian(0, 1/N)
// entries, stored row-major: entries[i*k + j].
struct ProjectionDirections {
    int n = 0;
    int k = 0;
    std::vector<double> entries;

    double at(int i, int j) const { return entries[static_cast<std::size_t>(i) * k + j]; }
};

ProjectionDirections sample_directions(int n, int k, Rng& rng);

// Theta^T x, the k-dimensional projection. Requires x.size() == N.
std::vector<double> project(const ProjectionDirections& theta, std::span<const double> x);
void project_into(const ProjectionDirections& theta, std::span<const double> x,
                  std::span<double> out);

// One draw from a replicated projection law: 2p replicas in R^k,
// flattened replica-major (replica l occupies [l*k, (l+1)*k)).
struct ReplicatedProjectionSample {
    int p = 1;
    int k = 1;
    std::vector<double> values;

    std::span<const double> replica(int l) const {
        return std::span<const double>(values).subspan(static_cast<std::size_t>(l) * k, k);
    }
};

// P_N: one Theta (fresh, or `fixed_theta` when non-null, supporting the
// conditional-law experiments) applied to 2p fresh replicas of the source.
ReplicatedProjectionSample sample_pn(const sources::VectorSource& source, int p, int k,
                                     Rng& rng,
                                     const ProjectionDirections* fixed_theta = nullptr);

// Q_N: Theta^T mean_vec + sqrt(rho - q) xi^l with iid standard Gaussian
// xi^l; the shift Theta^T mean_vec is drawn fresh and shared across the
// 2p replicas. Requires 0 <= q < rho.
ReplicatedProjectionSample sample_qn(std::span<const double> mean_vec, double rho, double q,
                                     int p, int k, Rng& rng);

// Q = N(0, R^{2p}_{rho,q} (x) I_k) via the shared-z construction
// sqrt(q) z + sqrt(rho - q) xi^l. Requires 0 <= q < rho.
ReplicatedProjectionSample sample_q(double rho, double q, int p, int k, Rng& rng);

// Batch persistence: CSV with header "replica,coord_1..coord_k" (one row
// per replica per sample), and raw little-endian doubles with a JSON
// sidecar describing the shape and seed.
void save_samples_csv(const std::string& path,
                      std::span<const ReplicatedProjectionSample> samples);
void save_samples_raw(const std::string& path, const std::string& sidecar_path,
                      std::span<const ReplicatedProjectionSample> samples,
                      std::uint64_t seed);

}  // namespace projlab::projection
