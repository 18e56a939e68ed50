#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <vector>

namespace c2t {

// 64-bit FNV-1a, used for template ids, config hashes and RNG stream splitting.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t v, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(&v, sizeof(v), h);
}

// Deterministic RNG wrapper. All distributions are implemented here so that
// streams are reproducible independent of the standard library's
// distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform01() {
        return (eng_() >> 11) * 0x1.0p-53;
    }

    // [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // {0, ..., n-1}
    std::uint64_t uniform_int(std::uint64_t n) {
        // modulo bias is negligible for n << 2^64 and irrelevant for reproducibility
        return eng_() % n;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    double normal() {
        // Box-Muller, no cached spare (keeps the stream position predictable)
        double u1 = uniform01(), u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        // Knuth; arrival rates here are small (<~5 per step)
        double l = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform01();
        } while (p > l && k < 10000);
        return k - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_int(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent substream derived from (seed, stream id).
    static Rng split(std::uint64_t seed, std::uint64_t stream) {
        return Rng(fnv1a_u64(stream, fnv1a_u64(seed)));
    }

private:
    std::mt19937_64 eng_;
};

} // namespace c2t
