#pragma once

// Deterministic RNG used across the project. All draws are hand-rolled on
// top of mt19937_64 so the byte stream does not depend on the standard
// library's distribution implementations.

#include <cstdint>
#include <random>
#include <vector>

namespace execforge {

// splitmix64 step; used for seed mixing and derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Combine a base seed with stream indices (epoch, rollout index, ...) into
// an independent stream seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = base;
    std::uint64_t h = splitmix64(s);
    s ^= a + 0x9e3779b97f4a7c15ULL;
    h ^= splitmix64(s);
    s ^= b + 0xc2b2ae3d27d4eb4fULL;
    h ^= splitmix64(s);
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform double in [0, 1), 53 bits of entropy.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [lo, hi] inclusive, rejection sampled (no modulo bias).
    int next_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return lo + static_cast<int>(v % span);
    }

    std::size_t next_index(std::size_t n) {
        return static_cast<std::size_t>(next_int(0, static_cast<int>(n - 1)));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[next_index(i)]);
        }
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace execforge
