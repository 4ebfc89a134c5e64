#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ecit {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-mode child seed: depends only on (parent, index), never on the
// order in which children are requested.
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::uint64_t index) noexcept {
  return mix64(mix64(parent) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named child stream, e.g. derive_seed(seed, "mechanisms").
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::string_view label) noexcept {
  return derive_seed(parent, fnv1a64(label));
}

}  // namespace ecit
