#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fedadg {

// Deterministic random source. All distributions are implemented explicitly
// on top of mt19937_64 so that sequences are reproducible bit-for-bit; the
// std:: distribution adaptors are implementation-defined and are not used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (no spare caching).
  double normal();

  // Laplace(0, scale) via inverse CDF.
  double laplace(double scale);

  // Uniform integer in [0, n), unbiased.
  std::size_t uniform_index(std::size_t n);

  void fill_uniform(std::vector<double>& out, double lo, double hi);
  void fill_normal(std::vector<double>& out, double mean, double stddev);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = uniform_index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fedadg
