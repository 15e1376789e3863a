#ifndef CORESCALE_RNG_HPP
#define CORESCALE_RNG_HPP

#include <cstdint>
#include <cmath>

namespace corescale {

// Counter-based stream derivation: every (seed, stream) pair yields an
// independent xoshiro256++ generator, so trial i always sees the same
// randomness no matter how trials are scheduled across threads.
inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    Rng() : Rng(0, 0) {}

    Rng(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed ^ (0xD2B74407B1CE6E93ULL * (stream + 1));
        for (int i = 0; i < 4; ++i) state_[i] = splitmix64(s);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
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

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0,1], safe as a log() argument
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // unbiased integer in [0, n) by rejection
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t lim = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do { x = next_u64(); } while (x >= lim);
        return x % n;
    }

    // standard normal, Box-Muller (the spare keeps pairs together per stream)
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double exponential() { return -std::log(uniform_pos()); }

    // Knuth multiplication for small means, split recursively otherwise
    long poisson(double mean) {
        long k = 0;
        while (mean > 30.0) {
            // thin the mean with a gamma-free split: Poisson(m) = Poisson(m/2)+Poisson(m/2)
            k += poisson(mean / 2);
            mean /= 2;
        }
        const double limit = std::exp(-mean);
        double prod = uniform();
        long c = 0;
        while (prod > limit) {
            ++c;
            prod *= uniform();
        }
        return k + c;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
    double spare_;
    bool has_spare_;
};

}  // namespace corescale

#endif
