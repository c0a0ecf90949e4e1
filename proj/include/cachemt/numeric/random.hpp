#pragma once

#include <cstdint>
#include <random>

#include "cachemt/numeric/tensor.hpp"

namespace cachemt::numeric {

// Every stochastic routine takes an Rng& explicitly; nothing seeds itself.
using Rng = std::mt19937_64;

// Portable across standard libraries, unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Uniform integer in [0, n). Rejection sampling keeps it unbiased and portable.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

void fill_uniform(Tensor& t, double lo, double hi, Rng& rng);

template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_index(rng, i);
    std::iter_swap(first + static_cast<std::ptrdiff_t>(i - 1), first + static_cast<std::ptrdiff_t>(j));
  }
}

template <typename Container>
void shuffle(Container& c, Rng& rng) {
  shuffle(c.begin(), c.end(), rng);
}

}  // namespace cachemt::numeric
