#pragma once

#include <cstdint>
#include <string_view>

namespace tcm {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (char ch : s) {
    h ^= static_cast<std::uint8_t>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed for one (global seed, item id, layer) triple. Independent of the order
// in which items are scheduled, so parallel runs reproduce serial ones.
constexpr std::uint64_t stable_hash(std::uint64_t seed, std::string_view id, std::uint64_t index) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ fnv1a(id));
  return mix64(h ^ mix64(index + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t stable_hash(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(mix64(seed) ^ mix64(a)) ^ mix64(b + 1));
}

}  // namespace tcm
