#pragma once

#include <cstdint>
#include <string_view>

namespace moma {

/// Deterministic pseudo-random stream (splitmix64 core). Every sampling
/// routine in the project draws from an explicitly passed Rng so that a
/// (config, seed) pair fully determines a run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (pairs cached).
  double normal();

  /// Uniform integer in [0, n).
  int uniform_int(int n);
  long long uniform_int64(long long n);

  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child stream; advances this stream by one draw.
  Rng fork(std::string_view tag);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace moma
