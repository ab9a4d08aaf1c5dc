#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "projlab/errors.hpp"
#include "projlab/rng.hpp"

namespace projlab::sources {

// Stream of single replicas; owns its generator so parallel consumers
// derive independent streams by seed.
class SampleStream {
  public:
    virtual ~SampleStream() = default;
    virtual void next(std::span<double> out) = 0;
};

// Stream of replica pairs (x^1, x^2) drawn from the same conditional law.
class PairStream {
  public:
    virtual ~PairStream() = default;
    virtual void next(std::span<double> out1, std::span<double> out2) = 0;
};

// A sampler of random vectors x in R^N with replica semantics: successive
// draws with independent sub-seeds are iid replicas from the same
// (possibly disorder-conditional) law. Declared (rho, q) targets are the
// analytic thin-shell and overlap constants when known.
class VectorSource {
  public:
    virtual ~VectorSource() = default;
    virtual int dimension() const = 0;
    virtual double rho() const = 0;
    virtual double q() const = 0;
    // <x> when analytically available (length N); nullopt otherwise.
    virtual std::optional<std::vector<double>> mean_vector() const = 0;
    // One independent replica.
    virtual void draw(std::span<double> out, Rng& rng) const = 0;
    virtual std::unique_ptr<SampleStream> make_stream(std::uint64_t seed) const;
    virtual std::unique_ptr<PairStream> make_pair_stream(std::uint64_t seed) const;
    virtual std::string describe() const = 0;
};

enum class ProductBase { gaussian, rademacher_shifted, uniform_shifted };

// iid coordinates with mean sqrt(q) and variance rho - q.
// Requires 0 <= q < rho.
std::unique_ptr<VectorSource> subgaussian_product(int n, double rho, double q,
                                                  ProductBase base);

// Gaussian with diagonal covariance `spectrum` (entries >= 0, length N)
// and the given mean vector. Supports the sqrt(N)-spiked spectrum.
std::unique_ptr<VectorSource> spiked_gaussian(std::vector<double> spectrum,
                                              std::vector<double> mean);

// Wraps a source, replacing its declared (rho, q) targets. Used when the
// estimator's declared constants deliberately differ from the source's
// own concentration values (e.g. point masses with declared rho > q).
std::unique_ptr<VectorSource> override_targets(std::shared_ptr<const VectorSource> inner,
                                               double rho, double q);
std::unique_ptr<VectorSource> override_targets(std::unique_ptr<VectorSource> inner,
                                               double rho, double q);

// ---------------------------------------------------------------------
// Sherrington-Kirkpatrick model
// ---------------------------------------------------------------------

// -H_N(x) = (beta/sqrt(N)) sum_{i<j} g_ij x_i x_j + h sum_i x_i on
// {+-1}^N; the couplings g_ij are the quenched disorder.
struct SkModel {
    int n = 0;
    double beta = 0.0;
    double h = 0.0;
    std::uint64_t disorder_seed = 0;
    // Upper triangle, row-major: g_ij for i < j at
    // index i*n - i(i+1)/2 + (j-i-1).
    std::vector<double> couplings;

    std::size_t upper_index(int i, int j) const;
    double coupling(int i, int j) const;  // symmetric accessor, 0 on diagonal
};

SkModel make_sk_model(int n, double beta, double h, std::uint64_t disorder_seed);

// Binary disorder file: 16-byte header (magic "SKDZ", u32 N, u64 seed,
// little-endian) followed by the row-major upper-triangular couplings as
// little-endian doubles.
void save_disorder(const std::string& path, const SkModel& model);
SkModel load_disorder(const std::string& path, double beta, double h);

// Approximate Gibbs sampling by single-site heat-bath (Glauber) sweeps.
// draw() runs a fresh independently seeded chain (burnin sweeps) per
// replica; make_pair_stream() runs two persistent chains on the shared
// disorder and pairs their thinned states. Mixing at beta < 1/2 is a
// documented assumption, not checked.
class SkGlauberSource : public VectorSource {
  public:
    SkGlauberSource(SkModel model, int burnin_sweeps, int thin_sweeps);

    int dimension() const override { return model_.n; }
    double rho() const override { return 1.0; }  // |x|^2/N == 1 on {+-1}^N
    double q() const override;                   // fixed point of Example 2
    std::optional<std::vector<double>> mean_vector() const override { return std::nullopt; }
    void draw(std::span<double> out, Rng& rng) const override;
    std::unique_ptr<SampleStream> make_stream(std::uint64_t seed) const override;
    std::unique_ptr<PairStream> make_pair_stream(std::uint64_t seed) const override;
    std::string describe() const override;

    const SkModel& model() const { return model_; }
    int burnin() const { return burnin_; }
    int thin() const { return thin_; }

    // <x>_d estimated sitewise from one long chain (no closed form).
    std::vector<double> estimate_mean(std::int64_t kept_samples = 10000,
                                      std::uint64_t seed = 0) const;

  private:
    SkModel model_;
    int burnin_;
    int thin_;
    mutable double q_cache_ = -1.0;
};

// Solves q = E tanh^2(beta sqrt(q) z + h), z ~ N(0,1), by damped
// iteration (alpha = 1/2) with 64-node Gauss-Hermite quadrature; stops
// when successive iterates differ by < 1e-12.
// Throws NonConvergence after 10^4 iterations.
double sk_fixed_point(double beta, double h);

// E[f(Z)], Z ~ N(0,1), by 64-node Gauss-Hermite quadrature.
double gauss_hermite_expect(const std::function<double(double)>& f);

}  // namespace projlab::sources
