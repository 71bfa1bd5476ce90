#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace cfm {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Deterministic random stream. Distribution sampling is implemented here
/// rather than with std:: distributions so that a given seed produces the
/// same values on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)), seed_(seed) {}

    /// Derived stream for a named purpose, optionally indexed (per example,
    /// per step). Forking never disturbs the parent stream.
    Rng fork(std::string_view name, std::uint64_t index = 0) const {
        std::uint64_t s = seed_ ^ fnv1a64(name);
        s = splitmix64(s ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
        return Rng(s, Tag{});
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi], inclusive.
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        const std::uint64_t span = hi - lo + 1;
        if (span == 0) return next_u64();  // full range
        // Multiply-shift; bias is < 2^-64 per draw, irrelevant here, and the
        // mapping is deterministic.
        const unsigned __int128 m =
            static_cast<unsigned __int128>(next_u64()) * span;
        return lo + static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    struct Tag {};
    Rng(std::uint64_t derived, Tag) : engine_(derived), seed_(derived) {}

    std::mt19937_64 engine_;
    std::uint64_t seed_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cfm
