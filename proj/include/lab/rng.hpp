#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace lab {

/// Deterministic random stream. All sampling is implemented on top of the
/// raw 64-bit generator so that results are identical across standard
/// libraries, and child streams are derived from the seed (not the current
/// generator state) so concurrent cells are order-independent.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(mix(seed ^ 0x1f83d9abfb41bd6bULL)) {
        if (state_ == 0) state_ = 0x9e3779b97f4a7c15ULL; // xorshift must not start at 0
        // warm up so that low-entropy seeds (0, 1, 2, ...) diverge quickly
        next_u64();
        next_u64();
    }

    std::uint64_t seed() const { return seed_; }

    /// Child stream for cell `index`; children of the same parent are
    /// mutually independent and reproducible regardless of draw order.
    Rng child(std::uint64_t index) const {
        return Rng(mix(seed_ + 0x9e3779b97f4a7c15ULL * (index + 1)));
    }

    std::uint64_t next_u64() {
        // xorshift* variant seeded through splitmix; period is ample here
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dULL;
    }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via the polar method (no libm trig involved).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    /// Index sampled from a probability row (assumed normalized).
    int categorical(std::span<const double> probs) {
        if (probs.empty()) throw std::invalid_argument("categorical: empty distribution");
        const double x = uniform();
        double cum = 0.0;
        int last_positive = -1;
        for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
            if (probs[i] > 0.0) last_positive = i;
            cum += probs[i];
            if (x < cum) return i;
        }
        // x fell into the rounding gap at the top of the row
        if (last_positive < 0) throw std::invalid_argument("categorical: all-zero distribution");
        return last_positive;
    }

private:
    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace lab
