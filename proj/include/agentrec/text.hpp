#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace agentrec {

// Trims, collapses whitespace runs to one space and drops other control
// characters.
std::string normalize_whitespace(std::string_view text);

// Lowercases (ASCII) and splits on whitespace.
std::vector<std::string> tokenize_lower(std::string_view text);

// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// splitmix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace agentrec
