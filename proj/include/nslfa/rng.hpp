#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "nslfa/types.hpp"

namespace nslfa {

// splitmix64 step; used to derive independent per-job seeds so parallel
// and serial replication runs see identical streams.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// mt19937_64 with hand-rolled variate transforms. The engine is fully
// specified by the standard and the transforms below avoid the
// implementation-defined std distributions, so streams are reproducible
// across compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform on [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one variate per call.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  // uniform inside the d-ball of the given radius
  Vector in_ball(Index dim, double radius) {
    Vector dir = normal_vector(dim);
    double nrm = dir.norm();
    while (nrm == 0.0) {
      dir = normal_vector(dim);
      nrm = dir.norm();
    }
    const double r =
        radius * std::pow(uniform(), 1.0 / static_cast<double>(dim));
    return (r / nrm) * dir;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace nslfa
