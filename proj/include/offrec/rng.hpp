#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace offrec {

// Deterministic RNG with named sub-streams. Each component of a run draws
// from its own stream so that adding or removing one consumer (e.g. behavior
// pre-training) does not shift the draws seen by another.
class Rng {
 public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Derive an independent stream from a master seed and a purpose label.
    static Rng stream(std::uint64_t master_seed, const std::string& purpose) {
        std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
        for (char c : purpose) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 0x100000001b3ULL;
        }
        h ^= master_seed + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return Rng(splitmix(h));
    }

    double uniform() {
        // in (0, 1): never returns 0 so log() stays finite
        return (static_cast<double>(engine_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Gumbel(0,1) via inverse CDF
    double gumbel() { return -std::log(-std::log(uniform())); }

    // standard normal, Box-Muller (deterministic across platforms)
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // integer in [0, n)
    std::uint64_t index(std::uint64_t n) {
        // rejection sampling for an unbiased bounded draw
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    std::mt19937_64& engine() { return engine_; }

 private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace offrec
