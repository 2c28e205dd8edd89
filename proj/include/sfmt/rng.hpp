#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sfmt {

inline constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;

// FNV-1a 64-bit over raw bytes. Used for content hashes and RNG stream keys.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = kFnvOffset) {
    return fnv1a64(s.data(), s.size(), h);
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic RNG with implementation-independent output. std::mt19937 plus
// std distributions would tie corpus bytes to the standard library in use, so
// all draws are derived from splitmix64 directly.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // decorrelate nearby seeds
        splitmix64(state_);
    }

    // Stream keyed by (seed, name): order-independent per-object randomness.
    static Rng keyed(uint64_t seed, std::string_view name) {
        uint64_t h = fnv1a64(&seed, sizeof(seed));
        h = fnv1a64(name, h);
        return Rng(h);
    }

    uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be > 0.
    uint64_t uniform_int(uint64_t n) {
        // modulo bias is < 2^-40 for the n used here; acceptable
        return next_u64() % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; one value per call, cached pair discarded for simplicity.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates over indices 0..n-1.
    std::vector<size_t> permutation(size_t n) {
        std::vector<size_t> p(n);
        for (size_t i = 0; i < n; ++i) p[i] = i;
        for (size_t i = n; i > 1; --i) {
            size_t j = uniform_int(i);
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

private:
    uint64_t state_;
};

}  // namespace sfmt
