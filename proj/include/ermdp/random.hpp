#pragma once

#include <cstdint>
#include <random>

namespace ermdp {

// All randomness in the library flows through std::mt19937_64 engines whose
// seeds are derived with SplitMix64. Independent streams (per shard, per
// iteration, per purpose) get distinct derived seeds so that results do not
// depend on evaluation order.

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return derive_seed(derive_seed(seed, stream), index);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) { return Rng(derive_seed(seed, stream)); }

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    return Rng(derive_seed(seed, stream, index));
}

// Stream identifiers.
namespace stream {
inline constexpr std::uint64_t kTransitions = 1;
inline constexpr std::uint64_t kRewards = 2;
inline constexpr std::uint64_t kRewardNoise = 3;
inline constexpr std::uint64_t kBuffer = 4;
inline constexpr std::uint64_t kBatch = 5;
}  // namespace stream

}  // namespace ermdp
