#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>

namespace projlab {

// splitmix64 finalizer. Used both as a seed expander and as the mixing
// step of derive_seed.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ (Blackman & Vigna, public domain reference implementation).
// All randomness in the project flows through this generator so that runs
// are reproducible independent of platform stdlib internals.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t z = seed;
        for (auto& w : state_) {
            z += 0x9e3779b97f4a7c15ULL;
            w = splitmix64_mix(z);
        }
        has_spare_ = false;
        spare_ = 0.0;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Unbiased integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x >= threshold) return x % n;
        }
    }

    // Standard normal via Marsaglia polar; the spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * factor;
        has_spare_ = true;
        return u * factor;
    }

    void fill_normal(std::span<double> out) {
        for (auto& x : out) x = normal();
    }

    // +1 or -1 with equal probability.
    double rademacher() { return (next_u64() & 1ULL) ? 1.0 : -1.0; }

  private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
    bool has_spare_;
    double spare_;
};

// One element of a seed-derivation path: a label plus an index, e.g.
// {"outer", 17}. Labels keep unrelated experiment stages in disjoint
// seed streams even when the numeric indices collide.
struct SeedPathElem {
    std::string_view label;
    std::uint64_t index = 0;
};

// Collision-resistant deterministic seed derivation:
// hash(master || label_0 || index_0 || ...). Pure integer arithmetic, so
// identical on every platform and independent of worker scheduling.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<SeedPathElem> path) {
    std::uint64_t h = splitmix64_mix(master ^ 0x6a09e667f3bcc909ULL);
    for (const auto& elem : path) {
        // FNV-1a over the label bytes, folded into the running hash.
        std::uint64_t lh = 0xcbf29ce484222325ULL;
        for (const char c : elem.label) {
            lh ^= static_cast<unsigned char>(c);
            lh *= 0x100000001b3ULL;
        }
        h = splitmix64_mix(h ^ lh);
        h = splitmix64_mix(h ^ elem.index);
    }
    return h;
}

}  // namespace projlab
