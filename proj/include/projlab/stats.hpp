#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "projlab/parallel.hpp"

namespace projlab {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    return pairwise_sum(xs) / static_cast<double>(xs.size());
}

// Unbiased sample variance.
inline double sample_variance(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n < 2) return 0.0;
    const double m = mean(xs);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = xs[i] - m;
        sq[i] = d * d;
    }
    return pairwise_sum(sq) / static_cast<double>(n - 1);
}

// Standard error of the mean of iid items. (The jackknife SE of a plain
// mean reduces to exactly this.)
inline double standard_error(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n < 2) return std::numeric_limits<double>::infinity();
    return std::sqrt(sample_variance(xs) / static_cast<double>(n));
}

// Jackknife standard error for the centered second moment
// m2 = (1/n) sum (x_i - xbar)^2, using the O(n) leave-one-out identity.
inline double jackknife_se_central_m2(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n < 3) return std::numeric_limits<double>::infinity();
    const double nb = static_cast<double>(n);
    const double m = mean(xs);
    std::vector<double> dev2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = xs[i] - m;
        dev2[i] = d * d;
    }
    const double m2 = pairwise_sum(dev2) / nb;
    // Leave-one-out m2: ((n*m2) - dev2_i * n/(n-1)) / (n-1).
    std::vector<double> loo(n);
    for (std::size_t i = 0; i < n; ++i) {
        loo[i] = (nb * m2 - dev2[i] * nb / (nb - 1.0)) / (nb - 1.0);
    }
    const double loo_mean = mean(loo);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = loo[i] - loo_mean;
        sq[i] = d * d;
    }
    return std::sqrt((nb - 1.0) / nb * pairwise_sum(sq));
}

struct LineFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
};

inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return {};
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

// Streaming mean/variance accumulator that merges deterministically:
// per-chunk accumulators are combined in fixed index order by the caller.
struct OnlineMoments {
    std::size_t n = 0;
    double sum = 0.0;
    double sumsq = 0.0;

    void add(double x) {
        ++n;
        sum += x;
        sumsq += x * x;
    }
    void merge(const OnlineMoments& o) {
        n += o.n;
        sum += o.sum;
        sumsq += o.sumsq;
    }
    double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    double variance() const {
        if (n < 2) return 0.0;
        const double nb = static_cast<double>(n);
        const double v = (sumsq - sum * sum / nb) / (nb - 1.0);
        return v > 0.0 ? v : 0.0;
    }
    double se() const {
        return n >= 2 ? std::sqrt(variance() / static_cast<double>(n))
                      : std::numeric_limits<double>::infinity();
    }
    // z-score of the estimated mean against a target value.
    double zscore(double target) const {
        const double s = se();
        if (s == 0.0) return mean() == target ? 0.0 : std::numeric_limits<double>::infinity();
        return (mean() - target) / s;
    }
};

}  // namespace projlab
