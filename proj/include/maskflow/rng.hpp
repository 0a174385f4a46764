#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace maskflow {

// Seeding policy: every random draw in the project comes from a stream keyed
// by a stable 64-bit hash of (global_seed, namespace string, counter). Adding
// a new consumer with a fresh namespace never perturbs existing streams, and
// a stream's state is just (key, counter) — trivially serializable.

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 0xCBF29CE484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline uint64_t derive_seed(uint64_t global_seed, std::string_view ns, uint64_t counter) {
    uint64_t h = splitmix64(global_seed ^ splitmix64(fnv1a64(ns)));
    return splitmix64(h ^ splitmix64(counter));
}

struct Rng {
    uint64_t key = 0;
    uint64_t ctr = 0;

    Rng() = default;
    explicit Rng(uint64_t k) : key(k) {}
    Rng(uint64_t global_seed, std::string_view ns, uint64_t counter = 0)
        : key(derive_seed(global_seed, ns, counter)) {}

    uint64_t next_u64() { return splitmix64(key ^ splitmix64(0x632BE59BD9B4E019ULL + ctr++)); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Modulo bias is < n / 2^64, irrelevant here.
    int64_t uniform_int(int64_t n) { return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n)); }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller without caching so that stream state stays (key, counter).
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
};

}  // namespace maskflow
