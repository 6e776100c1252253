#pragma once

#include <cstdint>
#include <random>

namespace fasm {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream for (seed, index); used wherever per-draw or per-subject
// determinism across worker counts is required.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(index)));
}

}  // namespace fasm
