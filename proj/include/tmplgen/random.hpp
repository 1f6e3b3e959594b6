// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cassert>
#include <cstdint>
#include <limits>
#include <random>

namespace tmplgen {

// mt19937_64's output sequence is fixed by the standard, so seeded runs are
// reproducible across standard libraries. The distributions in <random> are
// not, which is why bounded draws below are done by hand.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Uniform integer in [0, bound) by rejection on the top of the 64-bit range.
template <typename Engine>
std::uint64_t uniform_below(Engine& rng, std::uint64_t bound) {
  assert(bound > 0);
  static_assert(Engine::min() == 0 &&
                Engine::max() == std::numeric_limits<std::uint64_t>::max());
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform index in [0, bound) that depends only on (seed, ordinal), so work
// split across threads draws the same values as a sequential pass.
inline std::uint64_t keyed_uniform(std::uint64_t seed, std::uint64_t ordinal,
                                   std::uint64_t bound) {
  assert(bound > 0);
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t state = splitmix64(seed) ^ splitmix64(~ordinal);
  for (;;) {
    state = splitmix64(state);
    if (state < limit) return state % bound;
  }
}

}  // namespace tmplgen
