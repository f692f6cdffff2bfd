#pragma once

#include <cmath>
#include <cstdint>

// Deterministic, platform-independent randomness. Every consumer of
// randomness (data generation, weight init, attack starts, dropout masks,
// per-epoch probes, eval) draws from its own stream derived from the run seed
// and a purpose tag, so adding draws in one place never shifts another
// stream. xoshiro256++ generator, splitmix64 seeding and mixing.

namespace des {

inline constexpr std::uint64_t kTagData = 0x64617461ULL;    // training/test data
inline constexpr std::uint64_t kTagInit = 0x696e6974ULL;    // weight init
inline constexpr std::uint64_t kTagAttack = 0x61747461ULL;  // attack random starts
inline constexpr std::uint64_t kTagMc = 0x6d63646fULL;      // mc-dropout masks
inline constexpr std::uint64_t kTagDrop = 0x64726f70ULL;    // training dropout masks
inline constexpr std::uint64_t kTagBatch = 0x62617463ULL;   // batch shuffling
inline constexpr std::uint64_t kTagProbe = 0x70726f62ULL;   // per-epoch robust probe
inline constexpr std::uint64_t kTagEval = 0x6576616cULL;    // final evaluation

inline std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

/// Fold a seed and any number of tags into a new 64-bit seed.
template <class... Tags>
std::uint64_t derive(std::uint64_t seed, Tags... tags) {
    std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
    ((h = mix64(h ^ (static_cast<std::uint64_t>(tags) + 0x9e3779b97f4a7c15ULL))), ...);
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) {
            std::uint64_t z = (sm += 0x9e3779b97f4a7c15ULL);
            word = mix64(z);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller. Draws exactly two uniforms per call
    /// (no cached spare), so the stream position is call-count predictable.
    double normal(double mean = 0.0, double stddev = 1.0) {
        const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
};

}  // namespace des
