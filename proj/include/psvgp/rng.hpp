#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace psvgp {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Deterministic random stream. The raw mt19937_64 sequence is fixed by the
// standard; all transforms below are spelled out explicitly so that a given
// seed yields the same draws on every platform and compiler.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Stream for one partition: mixes the id so nearby ids do not produce
  // correlated mt19937_64 initial states.
  static Rng for_partition(std::uint64_t master_seed, std::uint64_t partition_id) {
    return Rng(master_seed ^ splitmix64(partition_id + 1));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Rejection sampling, unbiased.
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller; caches the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // k distinct indices from {0, ..., n-1}, uniform over subsets
  // (partial Fisher-Yates). k >= n returns the identity permutation prefix
  // {0, ..., n-1} without consuming any state.
  std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k) {
    std::vector<std::uint64_t> pool(n);
    for (std::uint64_t i = 0; i < n; ++i) pool[i] = i;
    if (k >= n) return pool;
    for (std::uint64_t i = 0; i < k; ++i) {
      const std::uint64_t j = i + uniform_below(n - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace psvgp
