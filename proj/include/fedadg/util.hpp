#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fedadg {

// 64-bit FNV-1a. Used for config hashes and seed derivation; stable across
// platforms, unlike std::hash.
inline std::uint64_t fnv1a64(const void* bytes, std::size_t len,
                             std::uint64_t state = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < len; ++i) {
    state ^= p[i];
    state *= 0x100000001b3ULL;
  }
  return state;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t state = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), state);
}

// Derives an independent stream seed from a base seed, a scope label and an
// index. Clients, noise sources and evaluation all get disjoint streams this
// way, so execution order cannot leak between them.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view scope,
                                 std::uint64_t index = 0) {
  std::uint64_t h = fnv1a64(&base, sizeof(base));
  h = fnv1a64(scope, h);
  h = fnv1a64(&index, sizeof(index), h);
  // splitmix64 finalizer to spread low-entropy inputs
  h += 0x9e3779b97f4a7c15ULL;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline void ensure_finite(const std::vector<double>& v, const std::string& what) {
  if (!all_finite(v)) {
    throw std::runtime_error("non-finite values in " + what);
  }
}

}  // namespace fedadg
