// Copyright (c) 2026 pmmut contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

namespace pmmut {

// splitmix64 step; the whole project draws randomness from this one mixer so
// runs are reproducible across platforms and thread schedules.
inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Stateless counter-based draw: uniform in [0,1) for (seed, index).
// Used by dropout masks so forward and backward regenerate the same mask.
inline double counter_uniform(uint64_t seed, uint64_t index) {
  uint64_t s = seed ^ (0xD1B54A32D192ED03ull * (index + 1));
  uint64_t z = splitmix64(s);
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

// Small sequential generator. Streams for independent consumers are derived
// with derive() rather than by sharing one generator.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  static uint64_t derive(uint64_t seed, uint64_t stream) {
    uint64_t s = seed ^ (0x9E3779B97F4A7C15ull * (stream + 0x632BE59BD9B4E019ull));
    return splitmix64(s);
  }

  uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0,1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Inclusive range.
  int next_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
  }

  // Box-Muller without the cached spare, so draw counts stay predictable.
  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) *
           std::cos(6.283185307179586477 * u2);
  }

 private:
  uint64_t state_;
};

}  // namespace pmmut
