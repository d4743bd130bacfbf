#include "moma/nn/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "moma/common.hpp"

namespace moma {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 bounded away from zero so log() is finite.
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 1e-300);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

int Rng::uniform_int(int n) {
  return static_cast<int>(uniform_int64(n));
}

long long Rng::uniform_int64(long long n) {
  if (n <= 0) throw std::invalid_argument("Rng::uniform_int64: n must be positive");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return static_cast<long long>(x % bound);
}

Rng Rng::fork(std::string_view tag) {
  return Rng(fnv1a(tag, fnv1a_u64(next_u64())));
}

}  // namespace moma
