#ifndef TSDET_RNG_HPP
#define TSDET_RNG_HPP

#include <cstdint>
#include <random>

namespace tsd {

// Draw helpers with pinned bit-level behaviour so seeded runs reproduce
// byte-identically across standard library implementations.

inline double unit_double(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform_double(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * unit_double(g);
}

inline int uniform_index(std::mt19937_64& g, int n) {
    return static_cast<int>((static_cast<unsigned __int128>(g()) * static_cast<uint64_t>(n)) >> 64);
}

// Decorrelated stream for task `id` under one master seed.
inline std::mt19937_64 seeded_stream(uint64_t seed, uint64_t id) {
    std::mt19937_64 g(seed * 0x9E3779B97F4A7C15ull + id * 0xBF58476D1CE4E5B9ull + 1ull);
    g.discard(8);
    return g;
}

}  // namespace tsd

#endif
