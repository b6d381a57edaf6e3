#pragma once

#include <cstdint>

namespace obsketch {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Keyed hash of (seed, index, tag). Every pseudorandom decision of the sketch
// is a pure function of these three values, so replaying an update for the
// same row always touches the same buckets.
constexpr std::uint64_t keyed_hash(std::uint64_t seed, std::uint64_t index,
                                   std::uint64_t tag) noexcept {
  std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ (index * 0xd6e8feb86659fd93ULL));
  return mix64(h ^ (tag * 0xa0761d6478bd642fULL + 0xe7037ed1a0b428dbULL));
}

// Maps a 32-bit field onto [0, range) without modulo bias worth worrying
// about at the table sizes used here.
constexpr std::uint64_t reduce32(std::uint32_t field, std::uint64_t range) noexcept {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(field) * range) >> 32);
}

constexpr std::uint64_t reduce64(std::uint64_t h, std::uint64_t range) noexcept {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(h) * range) >> 64);
}

// Uniform double in [0, 1) from the top 53 bits.
constexpr double unit_double(std::uint64_t h) noexcept {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Tags separating the independent hash families.
namespace hash_tag {
inline constexpr std::uint64_t level0 = 0x100;       // + sub-table index
inline constexpr std::uint64_t level = 0x10000000;   // + level index
inline constexpr std::uint64_t uniform = 0x20000000;
inline constexpr std::uint64_t shift = 0x30000000;
}  // namespace hash_tag

}  // namespace obsketch
