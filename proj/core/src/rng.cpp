#include "epimob/rng.hpp"

namespace epimob {

std::int64_t binomial_draw(RngEngine& rng, std::int64_t n, double p) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  if (n < 32) {
    std::int64_t hits = 0;
    for (std::int64_t k = 0; k < n; ++k) {
      if (uniform01(rng) < p) ++hits;
    }
    return hits;
  }
  std::binomial_distribution<std::int64_t> dist(n, p);
  return dist(rng);
}

}  // namespace epimob
