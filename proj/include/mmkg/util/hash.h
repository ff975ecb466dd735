#ifndef MMKG_UTIL_HASH_H_
#define MMKG_UTIL_HASH_H_

#include <cstdint>
#include <string>
#include <string_view>

namespace mmkg::util {

// Lower-case hex SHA-256 of `bytes`.
std::string Sha256Hex(std::string_view bytes);

// True for exactly 64 lower-case hex digits.
bool IsSha256Hex(std::string_view text);

// Stable 64-bit FNV-1a, used to derive per-key seeds.
std::uint64_t Fnv1a64(std::string_view bytes);

// SplitMix64 finalizer; mixes a seed with a key hash.
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t key);

}  // namespace mmkg::util

#endif  // MMKG_UTIL_HASH_H_
