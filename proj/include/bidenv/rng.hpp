#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

namespace bidenv {

// splitmix64 stream. One 64-bit word of state, so streams are cheap to fork
// per campaign/day and trivial to serialize into checkpoints. Distributions
// are implemented here instead of <random> because std:: distribution output
// is implementation-defined and the dataset/metrics files must be
// byte-reproducible for a given seed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // integer in [0, n)
    std::uint64_t uniform_index(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        // Box-Muller, cosine branch only: wastes half the pair but keeps the
        // state a single word (no cached spare to serialize).
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // log-normal with mean exactly 1 and coefficient of variation cv
    double log_normal_mean1(double cv) {
        if (cv <= 0.0) return 1.0;
        double s2 = std::log(1.0 + cv * cv);
        return std::exp(normal() * std::sqrt(s2) - 0.5 * s2);
    }

    long poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 64.0) {
            // Knuth
            double limit = std::exp(-mean);
            double prod = uniform();
            long n = 0;
            while (prod > limit) {
                prod *= uniform();
                ++n;
            }
            return n;
        }
        // normal approximation for large means (synthetic data only)
        double v = std::round(mean + std::sqrt(mean) * normal());
        return v < 0.0 ? 0 : static_cast<long>(v);
    }

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

    // order-sensitive combine for deriving per-entity substreams
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
        a *= 0xff51afd7ed558ccdULL;
        a ^= a >> 33;
        return a;
    }

    static std::uint64_t hash_str(const std::string& s) {
        std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

  private:
    std::uint64_t state_;
};

}  // namespace bidenv
