#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "fef/common.hpp"

namespace fef {

// Deterministic PRNG with self-contained math so streams are reproducible
// across compilers and standard libraries. splitmix64 core; substreams are
// derived by hashing a label into the seed, which keeps draws independent
// of call ordering elsewhere in the program.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  static uint64_t hash_label(uint64_t seed, std::string_view label) {
    uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
    for (char c : label) h = (h ^ static_cast<uint64_t>(c)) * 0x100000001b3ULL;
    return h;
  }
  Rng stream(std::string_view label) const {
    return Rng(hash_label(state_, label));
  }
  Rng stream(uint64_t index) const {
    return Rng(hash_label(state_ ^ (index * 0xbf58476d1ce4e5b9ULL), "idx"));
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal, Box-Muller (one value per call; pair cached)
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // normal clipped by resampling to |z| <= 2 standard deviations
  double truncated_normal(double stddev) {
    double z = normal();
    while (std::fabs(z) > 2.0) z = normal();
    return z * stddev;
  }

  bool bernoulli(double p) { return uniform() < p; }

  int64_t uniform_int(int64_t lo, int64_t hi_inclusive) {
    uint64_t span = static_cast<uint64_t>(hi_inclusive - lo) + 1;
    return lo + static_cast<int64_t>(next_u64() % span);
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace fef
