#include "projlab/projection.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace projlab::projection {

ProjectionDirections sample_directions(int n, int k, Rng& rng) {
    if (!(k >= 1 && k < n)) {
        throw DomainError("sample_directions: requires 1 <= k < N");
    }
    ProjectionDirections theta;
    theta.n = n;
    theta.k = k;
    theta.entries.resize(static_cast<std::size_t>(n) * k);
    const double sd = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& e : theta.entries) e = sd * rng.normal();
    return theta;
}

void project_into(const ProjectionDirections& theta, std::span<const double> x,
                  std::span<double> out) {
    if (static_cast<int>(x.size()) != theta.n) {
        throw LengthMismatch("project: vector length does not match N");
    }
    const int k = theta.k;
    for (int j = 0; j < k; ++j) out[j] = 0.0;
    const double* e = theta.entries.data();
    for (int i = 0; i < theta.n; ++i) {
        const double xi = x[i];
        const double* row = e + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) out[j] += row[j] * xi;
    }
}

std::vector<double> project(const ProjectionDirections& theta, std::span<const double> x) {
    std::vector<double> out(theta.k);
    project_into(theta, x, out);
    return out;
}

ReplicatedProjectionSample sample_pn(const sources::VectorSource& source, int p, int k,
                                     Rng& rng, const ProjectionDirections* fixed_theta) {
    const int n = source.dimension();
    ProjectionDirections fresh;
    const ProjectionDirections* theta = fixed_theta;
    if (theta == nullptr) {
        fresh = sample_directions(n, k, rng);
        theta = &fresh;
    } else if (theta->n != n || theta->k != k) {
        throw LengthMismatch("sample_pn: fixed Theta shape does not match (N, k)");
    }
    ReplicatedProjectionSample out;
    out.p = p;
    out.k = k;
    out.values.resize(static_cast<std::size_t>(2 * p) * k);
    std::vector<double> x(n);
    for (int l = 0; l < 2 * p; ++l) {
        source.draw(x, rng);
        project_into(*theta, x,
                     std::span<double>(out.values).subspan(static_cast<std::size_t>(l) * k, k));
    }
    return out;
}

ReplicatedProjectionSample sample_qn(std::span<const double> mean_vec, double rho, double q,
                                     int p, int k, Rng& rng) {
    if (!(q >= 0.0 && q < rho)) throw DomainError("sample_qn: requires 0 <= q < rho");
    const int n = static_cast<int>(mean_vec.size());
    const ProjectionDirections theta = sample_directions(n, k, rng);
    std::vector<double> shift(k);
    project_into(theta, mean_vec, shift);
    const double sd = std::sqrt(rho - q);
    ReplicatedProjectionSample out;
    out.p = p;
    out.k = k;
    out.values.resize(static_cast<std::size_t>(2 * p) * k);
    for (int l = 0; l < 2 * p; ++l) {
        for (int j = 0; j < k; ++j) {
            out.values[static_cast<std::size_t>(l) * k + j] = shift[j] + sd * rng.normal();
        }
    }
    return out;
}

ReplicatedProjectionSample sample_q(double rho, double q, int p, int k, Rng& rng) {
    if (!(q >= 0.0 && q < rho)) throw DomainError("sample_q: requires 0 <= q < rho");
    const double sq = std::sqrt(q);
    const double sd = std::sqrt(rho - q);
    std::vector<double> z(k);
    for (auto& v : z) v = rng.normal();
    ReplicatedProjectionSample out;
    out.p = p;
    out.k = k;
    out.values.resize(static_cast<std::size_t>(2 * p) * k);
    for (int l = 0; l < 2 * p; ++l) {
        for (int j = 0; j < k; ++j) {
            out.values[static_cast<std::size_t>(l) * k + j] = sq * z[j] + sd * rng.normal();
        }
    }
    return out;
}

void save_samples_csv(const std::string& path,
                      std::span<const ReplicatedProjectionSample> samples) {
    std::ofstream out(path);
    if (!out) throw IoError("save_samples_csv: cannot open " + path);
    if (samples.empty()) throw IoError("save_samples_csv: empty batch");
    const int k = samples[0].k;
    out << "replica";
    for (int j = 1; j <= k; ++j) out << ",coord_" << j;
    out << "\n";
    char buf[64];
    for (const auto& s : samples) {
        for (int l = 0; l < 2 * s.p; ++l) {
            out << l + 1;
            for (int j = 0; j < k; ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", s.values[static_cast<std::size_t>(l) * k + j]);
                out << ',' << buf;
            }
            out << "\n";
        }
    }
    if (!out) throw IoError("save_samples_csv: write failed for " + path);
}

void save_samples_raw(const std::string& path, const std::string& sidecar_path,
                      std::span<const ReplicatedProjectionSample> samples,
                      std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_samples_raw: cannot open " + path);
    if (samples.empty()) throw IoError("save_samples_raw: empty batch");
    const int cols = 2 * samples[0].p * samples[0].k;
    for (const auto& s : samples) {
        for (const double v : s.values) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            unsigned char b[8];
            for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
            out.write(reinterpret_cast<const char*>(b), 8);
        }
    }
    if (!out) throw IoError("save_samples_raw: write failed for " + path);

    nlohmann::json sidecar;
    sidecar["rows"] = samples.size();
    sidecar["cols"] = cols;
    sidecar["p"] = samples[0].p;
    sidecar["k"] = samples[0].k;
    sidecar["seed"] = seed;
    sidecar["layout"] = "row-major little-endian float64, replica-major within a row";
    std::ofstream side(sidecar_path);
    if (!side) throw IoError("save_samples_raw: cannot open " + sidecar_path);
    side << sidecar.dump(2) << "\n";
}

}  // namespace projlab::projection
