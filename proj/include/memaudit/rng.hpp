#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace memaudit::rng {

/// splitmix64 step (Steele, Lea, Vigna). Used both as a seed expander and to
/// derive counter-based substreams: substream r of seed s is seeded with
/// the (r+1)-th splitmix64 output of state s.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t state = seed;
    std::uint64_t out = 0;
    for (std::uint64_t i = 0; i <= index; ++i) out = splitmix64_next(state);
    return out;
}

/// All stochastic components share this engine so results are reproducible
/// from the single 64-bit seed recorded in reports.
class Engine {
public:
    explicit Engine(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, n). Plain modulo reduction, documented as part of the
    /// resampling procedure; n is tiny relative to 2^64.
    std::uint64_t next_below(std::uint64_t n) { return gen_() % n; }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller, independent of any library
    /// distribution so streams are identical across platforms.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace memaudit::rng
