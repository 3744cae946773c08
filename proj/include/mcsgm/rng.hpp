#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mcsgm {

// splitmix64 step, used both as a seed mixer and to derive independent
// stream seeds from (master_seed, index) pairs.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic child seed for stream `index` under `master`. Mixing twice
// keeps adjacent indices uncorrelated.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t s = master ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL);
  splitmix64(s);
  return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(master, a), b);
}

// mt19937_64 with hand-rolled canonical conversions. The engine itself is
// bit-stable across platforms; std::uniform_real_distribution & friends are
// not, so we never use them.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, bound). Rejection from a power-of-two mask keeps
  // the draw exact and platform-independent.
  std::uint64_t uniform_index(std::uint64_t bound);

  // Standard normal via Box-Muller; the spare is cached.
  double normal();

  // Fisher-Yates permutation of {0, ..., n-1}.
  std::vector<std::uint32_t> permutation(std::size_t n);

  // Point uniform on the radius-r sphere in R^d (d >= 1).
  std::vector<double> sphere(std::size_t d, double r);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mcsgm
