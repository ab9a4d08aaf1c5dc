#include "projlab/sources.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace projlab::sources {

namespace {

// Default streams: one fresh replica (or pair) per draw.
class DrawStream final : public SampleStream {
  public:
    DrawStream(const VectorSource* src, std::uint64_t seed) : src_(src), rng_(seed) {}
    void next(std::span<double> out) override { src_->draw(out, rng_); }

  private:
    const VectorSource* src_;
    Rng rng_;
};

class DrawPairStream final : public PairStream {
  public:
    DrawPairStream(const VectorSource* src, std::uint64_t seed) : src_(src), rng_(seed) {}
    void next(std::span<double> out1, std::span<double> out2) override {
        src_->draw(out1, rng_);
        src_->draw(out2, rng_);
    }

  private:
    const VectorSource* src_;
    Rng rng_;
};

}  // namespace

std::unique_ptr<SampleStream> VectorSource::make_stream(std::uint64_t seed) const {
    return std::make_unique<DrawStream>(this, seed);
}

std::unique_ptr<PairStream> VectorSource::make_pair_stream(std::uint64_t seed) const {
    return std::make_unique<DrawPairStream>(this, seed);
}

// ---------------------------------------------------------------------
// Product source
// ---------------------------------------------------------------------

namespace {

class SubgaussianProductSource final : public VectorSource {
  public:
    SubgaussianProductSource(int n, double rho, double q, ProductBase base)
        : n_(n), rho_(rho), q_(q), base_(base),
          shift_(std::sqrt(q)), scale_(std::sqrt(rho - q)) {}

    int dimension() const override { return n_; }
    double rho() const override { return rho_; }
    double q() const override { return q_; }

    std::optional<std::vector<double>> mean_vector() const override {
        return std::vector<double>(n_, shift_);
    }

    void draw(std::span<double> out, Rng& rng) const override {
        switch (base_) {
            case ProductBase::gaussian:
                for (auto& x : out) x = shift_ + scale_ * rng.normal();
                break;
            case ProductBase::rademacher_shifted:
                for (auto& x : out) x = shift_ + scale_ * rng.rademacher();
                break;
            case ProductBase::uniform_shifted: {
                // Uniform on [-sqrt(3), sqrt(3)] has unit variance.
                constexpr double half_width = 1.7320508075688772;
                for (auto& x : out) x = shift_ + scale_ * rng.uniform(-half_width, half_width);
                break;
            }
        }
    }

    std::string describe() const override {
        const char* base = base_ == ProductBase::gaussian ? "gaussian"
                           : base_ == ProductBase::rademacher_shifted ? "rademacher-shifted"
                                                                      : "uniform-shifted";
        std::ostringstream os;
        os << "subgaussian-product(N=" << n_ << ", rho=" << rho_ << ", q=" << q_
           << ", base=" << base << ")";
        return os.str();
    }

  private:
    int n_;
    double rho_, q_;
    ProductBase base_;
    double shift_, scale_;
};

}  // namespace

std::unique_ptr<VectorSource> subgaussian_product(int n, double rho, double q,
                                                  ProductBase base) {
    if (n < 1) throw DomainError("subgaussian_product: N must be >= 1");
    if (!(q >= 0.0 && q < rho)) {
        throw DomainError("subgaussian_product: requires 0 <= q < rho");
    }
    return std::make_unique<SubgaussianProductSource>(n, rho, q, base);
}

// ---------------------------------------------------------------------
// Spiked Gaussian source
// ---------------------------------------------------------------------

namespace {

class SpikedGaussianSource final : public VectorSource {
  public:
    SpikedGaussianSource(std::vector<double> spectrum, std::vector<double> mean)
        : spectrum_(std::move(spectrum)), mean_(std::move(mean)) {
        sd_.resize(spectrum_.size());
        double trace = 0.0, mean_sq = 0.0;
        for (std::size_t i = 0; i < spectrum_.size(); ++i) {
            sd_[i] = std::sqrt(spectrum_[i]);
            trace += spectrum_[i];
            mean_sq += mean_[i] * mean_[i];
        }
        const double n = static_cast<double>(spectrum_.size());
        rho_ = (trace + mean_sq) / n;
        q_ = mean_sq / n;
    }

    int dimension() const override { return static_cast<int>(spectrum_.size()); }
    double rho() const override { return rho_; }
    double q() const override { return q_; }
    std::optional<std::vector<double>> mean_vector() const override { return mean_; }

    void draw(std::span<double> out, Rng& rng) const override {
        for (std::size_t i = 0; i < sd_.size(); ++i) {
            out[i] = mean_[i] + (sd_[i] > 0.0 ? sd_[i] * rng.normal() : 0.0);
        }
    }

    const std::vector<double>& spectrum() const { return spectrum_; }

    std::string describe() const override {
        std::ostringstream os;
        os << "spiked-gaussian(N=" << spectrum_.size() << ", rho=" << rho_ << ", q=" << q_ << ")";
        return os.str();
    }

  private:
    std::vector<double> spectrum_, mean_, sd_;
    double rho_, q_;
};

}  // namespace

std::unique_ptr<VectorSource> spiked_gaussian(std::vector<double> spectrum,
                                              std::vector<double> mean) {
    if (spectrum.empty() || spectrum.size() != mean.size()) {
        throw DomainError("spiked_gaussian: spectrum and mean must have equal nonzero length");
    }
    for (const double v : spectrum) {
        if (v < 0.0) throw DomainError("spiked_gaussian: spectrum entries must be >= 0");
    }
    return std::make_unique<SpikedGaussianSource>(std::move(spectrum), std::move(mean));
}

// ---------------------------------------------------------------------
// Declared-target override
// ---------------------------------------------------------------------

namespace {

class OverrideTargets final : public VectorSource {
  public:
    OverrideTargets(std::shared_ptr<const VectorSource> inner, double rho, double q)
        : inner_(std::move(inner)), rho_(rho), q_(q) {}

    int dimension() const override { return inner_->dimension(); }
    double rho() const override { return rho_; }
    double q() const override { return q_; }
    std::optional<std::vector<double>> mean_vector() const override {
        return inner_->mean_vector();
    }
    void draw(std::span<double> out, Rng& rng) const override { inner_->draw(out, rng); }
    std::unique_ptr<SampleStream> make_stream(std::uint64_t seed) const override {
        return inner_->make_stream(seed);
    }
    std::unique_ptr<PairStream> make_pair_stream(std::uint64_t seed) const override {
        return inner_->make_pair_stream(seed);
    }
    std::string describe() const override {
        std::ostringstream os;
        os << inner_->describe() << " with declared rho=" << rho_ << ", q=" << q_;
        return os.str();
    }

  private:
    std::shared_ptr<const VectorSource> inner_;
    double rho_, q_;
};

}  // namespace

std::unique_ptr<VectorSource> override_targets(std::shared_ptr<const VectorSource> inner,
                                               double rho, double q) {
    if (!(q >= 0.0 && q < rho)) throw DomainError("override_targets: requires 0 <= q < rho");
    return std::make_unique<OverrideTargets>(std::move(inner), rho, q);
}

std::unique_ptr<VectorSource> override_targets(std::unique_ptr<VectorSource> inner,
                                               double rho, double q) {
    return override_targets(std::shared_ptr<const VectorSource>(std::move(inner)), rho, q);
}

// ---------------------------------------------------------------------
// SK model
// ---------------------------------------------------------------------

std::size_t SkModel::upper_index(int i, int j) const {
    // i < j assumed.
    return static_cast<std::size_t>(i) * n - static_cast<std::size_t>(i) * (i + 1) / 2 +
           (j - i - 1);
}

double SkModel::coupling(int i, int j) const {
    if (i == j) return 0.0;
    if (i > j) std::swap(i, j);
    return couplings[upper_index(i, j)];
}

SkModel make_sk_model(int n, double beta, double h, std::uint64_t disorder_seed) {
    if (n < 2) throw DomainError("make_sk_model: N must be >= 2");
    if (beta < 0.0) throw DomainError("make_sk_model: beta must be >= 0");
    SkModel model;
    model.n = n;
    model.beta = beta;
    model.h = h;
    model.disorder_seed = disorder_seed;
    model.couplings.resize(static_cast<std::size_t>(n) * (n - 1) / 2);
    Rng rng(disorder_seed);
    for (auto& g : model.couplings) g = rng.normal();
    return model;
}

namespace {

void put_u32_le(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64_le(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32_le(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64_le(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

// Doubles are written as little-endian IEEE-754 bit patterns.
void put_f64_le(std::ofstream& out, double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    put_u64_le(out, bits);
}

double get_f64_le(std::ifstream& in) {
    const std::uint64_t bits = get_u64_le(in);
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
}

}  // namespace

void save_disorder(const std::string& path, const SkModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_disorder: cannot open " + path);
    out.write("SKDZ", 4);
    put_u32_le(out, static_cast<std::uint32_t>(model.n));
    put_u64_le(out, model.disorder_seed);
    for (const double g : model.couplings) put_f64_le(out, g);
    if (!out) throw IoError("save_disorder: write failed for " + path);
}

SkModel load_disorder(const std::string& path, double beta, double h) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_disorder: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SKDZ", 4) != 0) {
        throw IoError("load_disorder: bad magic in " + path);
    }
    SkModel model;
    model.n = static_cast<int>(get_u32_le(in));
    model.disorder_seed = get_u64_le(in);
    model.beta = beta;
    model.h = h;
    if (model.n < 2) throw IoError("load_disorder: invalid order in " + path);
    model.couplings.resize(static_cast<std::size_t>(model.n) * (model.n - 1) / 2);
    for (auto& g : model.couplings) g = get_f64_le(in);
    if (!in) throw IoError("load_disorder: truncated file " + path);
    return model;
}

namespace {

// Single heat-bath chain with incremental local fields. The scaled
// coupling matrix J_ij = beta g_ij / sqrt(N) is densified once per chain
// so a flip costs one row traversal.
class SkChain {
  public:
    SkChain(const SkModel& model, std::uint64_t seed)
        : n_(model.n), h_(model.h), rng_(seed), j_(static_cast<std::size_t>(model.n) * model.n),
          spins_(model.n), local_(model.n) {
        const double scale = model.beta / std::sqrt(static_cast<double>(model.n));
        for (int i = 0; i < n_; ++i) {
            for (int j = i + 1; j < n_; ++j) {
                const double v = scale * model.couplings[model.upper_index(i, j)];
                j_[static_cast<std::size_t>(i) * n_ + j] = v;
                j_[static_cast<std::size_t>(j) * n_ + i] = v;
            }
            j_[static_cast<std::size_t>(i) * n_ + i] = 0.0;
        }
        for (int i = 0; i < n_; ++i) spins_[i] = rng_.rademacher();
        recompute_local();
    }

    void sweep() {
        for (int i = 0; i < n_; ++i) {
            const double m = local_[i] + h_;
            const double p_plus = 1.0 / (1.0 + std::exp(-2.0 * m));
            const double s_new = (rng_.uniform01() < p_plus) ? 1.0 : -1.0;
            const double delta = s_new - spins_[i];
            if (delta != 0.0) {
                spins_[i] = s_new;
                const double* row = &j_[static_cast<std::size_t>(i) * n_];
                for (int j = 0; j < n_; ++j) local_[j] += row[j] * delta;
            }
        }
    }

    void run(int sweeps) {
        for (int s = 0; s < sweeps; ++s) sweep();
    }

    void copy_state(std::span<double> out) const {
        for (int i = 0; i < n_; ++i) out[i] = spins_[i];
    }

  private:
    void recompute_local() {
        for (int i = 0; i < n_; ++i) {
            double acc = 0.0;
            const double* row = &j_[static_cast<std::size_t>(i) * n_];
            for (int j = 0; j < n_; ++j) acc += row[j] * spins_[j];
            local_[i] = acc;
        }
    }

    int n_;
    double h_;
    Rng rng_;
    std::vector<double> j_;
    std::vector<double> spins_;
    std::vector<double> local_;
};

class SkSampleStream final : public SampleStream {
  public:
    SkSampleStream(const SkModel& model, int burnin, int thin, std::uint64_t seed)
        : chain_(model, seed), thin_(thin) {
        chain_.run(burnin);
    }
    void next(std::span<double> out) override {
        chain_.run(thin_);
        chain_.copy_state(out);
    }

  private:
    SkChain chain_;
    int thin_;
};

// Replica pairs from two independent chains on the shared disorder.
class SkPairStream final : public PairStream {
  public:
    SkPairStream(const SkModel& model, int burnin, int thin, std::uint64_t seed)
        : a_(model, derive_seed(seed, {{"sk-chain", 0}})),
          b_(model, derive_seed(seed, {{"sk-chain", 1}})),
          thin_(thin) {
        a_.run(burnin);
        b_.run(burnin);
    }
    void next(std::span<double> out1, std::span<double> out2) override {
        a_.run(thin_);
        b_.run(thin_);
        a_.copy_state(out1);
        b_.copy_state(out2);
    }

  private:
    SkChain a_, b_;
    int thin_;
};

}  // namespace

SkGlauberSource::SkGlauberSource(SkModel model, int burnin_sweeps, int thin_sweeps)
    : model_(std::move(model)), burnin_(burnin_sweeps), thin_(thin_sweeps) {
    if (burnin_ < 1 || thin_ < 1) {
        throw DomainError("SkGlauberSource: burnin and thin must be >= 1");
    }
}

double SkGlauberSource::q() const {
    if (q_cache_ < 0.0) q_cache_ = sk_fixed_point(model_.beta, model_.h);
    return q_cache_;
}

void SkGlauberSource::draw(std::span<double> out, Rng& rng) const {
    // Fresh chain per replica; seed derived from the caller's stream so
    // the draw is reproducible yet independent of other replicas.
    SkChain chain(model_, rng.next_u64());
    chain.run(burnin_);
    chain.copy_state(out);
}

std::unique_ptr<SampleStream> SkGlauberSource::make_stream(std::uint64_t seed) const {
    return std::make_unique<SkSampleStream>(model_, burnin_, thin_, seed);
}

std::unique_ptr<PairStream> SkGlauberSource::make_pair_stream(std::uint64_t seed) const {
    return std::make_unique<SkPairStream>(model_, burnin_, thin_, seed);
}

std::string SkGlauberSource::describe() const {
    std::ostringstream os;
    os << "sk-glauber(N=" << model_.n << ", beta=" << model_.beta << ", h=" << model_.h
       << ", burnin=" << burnin_ << ", thin=" << thin_ << ", disorder_seed="
       << model_.disorder_seed << ")";
    return os.str();
}

std::vector<double> SkGlauberSource::estimate_mean(std::int64_t kept_samples,
                                                   std::uint64_t seed) const {
    auto stream = make_stream(seed);
    std::vector<double> acc(model_.n, 0.0);
    std::vector<double> state(model_.n);
    for (std::int64_t s = 0; s < kept_samples; ++s) {
        stream->next(state);
        for (int i = 0; i < model_.n; ++i) acc[i] += state[i];
    }
    for (auto& v : acc) v /= static_cast<double>(kept_samples);
    return acc;
}

// ---------------------------------------------------------------------
// Gauss-Hermite quadrature and the Example 2 fixed point
// ---------------------------------------------------------------------

namespace {

struct GaussHermiteTable {
    std::vector<double> nodes;    // already scaled by sqrt(2)
    std::vector<double> weights;  // normalized to sum 1
};

// Golub-Welsch on the physicists' Hermite Jacobi matrix: zero diagonal,
// off-diagonal sqrt(j/2). Weights are the squared first eigenvector
// components; after normalization E f(Z) = sum_i w_i f(sqrt(2) t_i).
GaussHermiteTable build_gauss_hermite(int n) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int j = 1; j < n; ++j) {
        const double b = std::sqrt(j / 2.0);
        jacobi(j - 1, j) = b;
        jacobi(j, j - 1) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    GaussHermiteTable table;
    table.nodes.resize(n);
    table.weights.resize(n);
    const double sqrt2 = std::sqrt(2.0);
    for (int i = 0; i < n; ++i) {
        table.nodes[i] = sqrt2 * es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        table.weights[i] = v0 * v0;
    }
    return table;
}

const GaussHermiteTable& gauss_hermite_64() {
    static const GaussHermiteTable table = build_gauss_hermite(64);
    return table;
}

}  // namespace

double gauss_hermite_expect(const std::function<double(double)>& f) {
    const auto& table = gauss_hermite_64();
    double acc = 0.0;
    for (std::size_t i = 0; i < table.nodes.size(); ++i) {
        acc += table.weights[i] * f(table.nodes[i]);
    }
    return acc;
}

double sk_fixed_point(double beta, double h) {
    if (beta < 0.0) throw DomainError("sk_fixed_point: beta must be >= 0");
    const auto map = [&](double q) {
        const double bq = beta * std::sqrt(q);
        return gauss_hermite_expect([&](double z) {
            const double t = std::tanh(bq * z + h);
            return t * t;
        });
    };
    double q = std::tanh(h) * std::tanh(h);
    constexpr double alpha = 0.5;
    for (int iter = 0; iter < 10000; ++iter) {
        const double next = (1.0 - alpha) * q + alpha * map(q);
        if (std::abs(next - q) < 1e-12) return next;
        q = next;
    }
    throw NonConvergence("sk_fixed_point: no convergence after 10^4 iterations");
}

}  // namespace projlab::sources
