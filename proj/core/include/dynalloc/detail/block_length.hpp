#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

namespace dynalloc {

// Inversion sampling of the geometric law P(L = k) = p (1-p)^(k-1), p = 1/mean.
template <typename Rng>
std::size_t sample_block_length(Rng& rng, double expected_block) {
  if (!(expected_block > 1.0)) return 1;
  if (std::isinf(expected_block)) return std::numeric_limits<std::size_t>::max();
  const double p = 1.0 / expected_block;
  const double u = 1.0 - rng.uniform();  // (0, 1]
  const double k = std::floor(std::log(u) / std::log1p(-p));
  if (k >= static_cast<double>(std::numeric_limits<std::size_t>::max() / 2)) {
    return std::numeric_limits<std::size_t>::max() / 2;
  }
  return 1 + static_cast<std::size_t>(k);
}

}  // namespace dynalloc
