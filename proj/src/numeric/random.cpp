#include "cachemt/numeric/random.hpp"

#include <limits>

#include "cachemt/error.hpp"

namespace cachemt::numeric {

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw ContractError("uniform_index over an empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

void fill_uniform(Tensor& t, double lo, double hi, Rng& rng) {
  for (auto& x : t.data()) x = uniform(rng, lo, hi);
}

}  // namespace cachemt::numeric
