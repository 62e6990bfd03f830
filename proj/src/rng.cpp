#include "fedadg/rng.hpp"

#include <cmath>

namespace fedadg {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // u1 in (0, 1] so the log stays finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::laplace(double scale) {
  double u = uniform() - 0.5;
  double sign = (u < 0.0) ? -1.0 : 1.0;
  return -scale * sign * std::log(1.0 - 2.0 * std::abs(u));
}

std::size_t Rng::uniform_index(std::size_t n) {
  // Rejection sampling over the largest multiple of n that fits in 64 bits.
  std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

void Rng::fill_uniform(std::vector<double>& out, double lo, double hi) {
  for (double& x : out) x = uniform(lo, hi);
}

void Rng::fill_normal(std::vector<double>& out, double mean, double stddev) {
  for (double& x : out) x = mean + stddev * normal();
}

}  // namespace fedadg
