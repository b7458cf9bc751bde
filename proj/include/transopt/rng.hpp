#pragma once

#include <cmath>
#include <cstdint>

namespace transopt {

// Stateless splitmix64 finalizer. All seed derivation in the project goes
// through this single function so datasets and models are reproducible
// across machines.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Combines two 64-bit values into a new seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (0x9E3779B97F4A7C15ULL * b + 0x632BE59BD9B4E019ULL));
}

template <typename... Rest>
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, Rest... rest) {
    return mix_seed(mix_seed(a, b), rest...);
}

// Counter-free splittable generator: the state walks the splitmix64 sequence
// seeded by mix_seed(seed, stream). Two streams split from the same parent
// with different ids produce unrelated sequences.
class SplitRng {
public:
    SplitRng(std::uint64_t seed, std::uint64_t stream)
        : state_(mix_seed(seed, stream)) {}

    explicit SplitRng(std::uint64_t seed) : SplitRng(seed, 0) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    SplitRng split(std::uint64_t stream) { return SplitRng(state_, stream); }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Box-Muller; std::normal_distribution is not bit-reproducible across
    // standard libraries.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Uniform integer in [0, n), n > 0. Rejection-free modulo of a 64-bit
    // draw; bias is negligible for the n used here but we debias anyway.
    std::uint64_t next_below(std::uint64_t n) {
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace transopt
