#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace fedsim {

// SplitMix64 finalizer. Used to derive independent sub-stream seeds from
// (seed, round, device, ...) tuples.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto p : parts) h = mix64(h ^ mix64(p));
  return h;
}

// Uniform double in [0, 1) from a stateless hash; used for lazy Q-table init.
constexpr double hash_unit(std::uint64_t h) noexcept {
  return static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
}

// Seeded generator whose every distribution is defined here rather than by the
// standard library, so streams are bit-identical across toolchains.
// std::mt19937_64 itself is fully specified by the standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::initializer_list<std::uint64_t> parts) : engine_(derive_seed(parts)) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Marsaglia-Tsang; shape > 0, unit scale.
  double gamma(double shape);

  std::vector<double> dirichlet(std::size_t k, double concentration);

  template <typename T>
  void shuffle(std::span<T> xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& xs) {
    shuffle(std::span<T>(xs));
  }

  // k distinct values from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fedsim
