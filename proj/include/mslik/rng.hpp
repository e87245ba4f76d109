#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "mslik/errors.hpp"

namespace mslik {

// splitmix64 finalizer. Used both as the seed mixer and to expand a seed
// into xoshiro state, so streams derived from nearby seeds are decorrelated.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// The documented replicate-seed mixer: chained splitmix64 over
// (master, n_leaves, replicate index). Fixed for curve portability.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = splitmix64(master);
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    return s;
}

// xoshiro256++ with explicit, platform-independent samplers. std::
// distributions are implementation-defined, which would break the
// bit-for-bit reproducibility contract of the Monte Carlo harness.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) {
            sm += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = sm;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
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
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // Box-Muller, cosine branch only so the stream layout stays fixed.
    double gaussian(double mean, double stddev) {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        return mean + stddev * z;
    }

    // Exact Poisson sampling. Knuth's product method for small means;
    // larger means are split as sums of independent halves, which keeps
    // the draw exact without a rejection sampler.
    std::int64_t poisson(double mean) {
        if (!(mean >= 0.0)) throw invalid_params("poisson mean must be >= 0");
        if (mean == 0.0) return 0;
        std::int64_t total = 0;
        while (mean > 30.0) {
            double half = mean / 2.0;
            total += poisson_knuth(half);
            mean -= half;
        }
        return total + poisson_knuth(mean);
    }

    // Exact binomial draw as a sum of Bernoulli trials. Trial counts in
    // this library are at most a few thousand, so this is fast enough
    // and avoids the numerically fragile inversion recurrences.
    std::int64_t binomial(std::int64_t trials, double p) {
        if (trials < 0) throw invalid_params("binomial trials must be >= 0");
        if (!(p >= 0.0 && p <= 1.0)) throw invalid_params("binomial p must be in [0,1]");
        if (p == 0.0 || trials == 0) return 0;
        if (p == 1.0) return trials;
        std::int64_t count = 0;
        for (std::int64_t i = 0; i < trials; ++i) {
            if (uniform() < p) ++count;
        }
        return count;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::int64_t poisson_knuth(double mean) {
        const double limit = std::exp(-mean);
        std::int64_t k = 0;
        double prod = uniform_pos();
        while (prod > limit) {
            ++k;
            prod *= uniform_pos();
        }
        return k;
    }

    std::uint64_t state_[4];
};

}  // namespace mslik
