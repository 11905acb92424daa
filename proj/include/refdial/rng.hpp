#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace refdial {

// All randomness in the library flows through explicitly seeded engines so
// that runs are reproducible bit-for-bit.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Derives an independent stream for a named purpose (epoch shuffles, dropout,
// per-instance context permutations) from a base seed.
inline Rng derive_rng(std::uint64_t base_seed, std::uint64_t stream, std::uint64_t step = 0) {
  std::seed_seq seq{base_seed, stream, step};
  std::vector<std::uint32_t> state(2);
  seq.generate(state.begin(), state.end());
  return Rng((std::uint64_t(state[0]) << 32) | state[1]);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

// Fisher-Yates permutation of [0, n).
inline std::vector<int> random_permutation(Rng& rng, int n) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> d(0, i);
    std::swap(p[i], p[d(rng)]);
  }
  return p;
}

}  // namespace refdial
