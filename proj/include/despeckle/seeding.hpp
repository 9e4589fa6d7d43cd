#pragma once

#include <cstdint>
#include <string_view>

namespace despeckle {

/// splitmix64 finalizer.
constexpr uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Independent child seed for a named stream of a root seed, so shuffling,
/// parameter init and phantom generation never share a random sequence.
constexpr uint64_t derive_seed(uint64_t root, std::string_view stream, uint64_t index = 0) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the stream name
    for (char c : stream) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return mix64(mix64(root ^ h) + index);
}

}  // namespace despeckle
