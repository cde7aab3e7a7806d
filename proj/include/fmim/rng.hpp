#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fmim {

// splitmix64 finalizer; decent avalanche for seed derivation.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent sub-seed from one master seed and a stream label,
// so every RNG consumer (init, shuffling, generation, ...) is individually
// reproducible from the single run seed.
inline uint64_t derive_seed(uint64_t master, std::string_view label) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : label) {
        h ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ULL;
    }
    return mix64(master ^ mix64(h));
}

inline std::mt19937_64 make_rng(uint64_t master, std::string_view label) {
    return std::mt19937_64(derive_seed(master, label));
}

}  // namespace fmim
