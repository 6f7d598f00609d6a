#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace csishield {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// xoshiro256++ generator. Chosen over <random> engines + distributions so
/// that every stream is bit-reproducible across standard library versions;
/// state is four words and trivially serializable.
class Rng {
 public:
  static constexpr const char* algorithm = "xoshiro256++";

  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64(sm);
    draws_ = 0;
  }

  /// Independent child stream; (seed, label) fully determines it.
  Rng fork(std::string_view label) const { return Rng(seed_ ^ fnv1a64(label)); }
  Rng fork(std::uint64_t stream) const {
    std::uint64_t sm = stream * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL;
    return Rng(seed_ ^ splitmix64(sm));
  }

  std::uint64_t next_u64() {
    ++draws_;
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// i in [0, n)
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal via the polar method (sqrt/log only, no trig).
  double normal() {
    for (;;) {
      const double u = 2.0 * uniform() - 1.0;
      const double v = 2.0 * uniform() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }
  const std::array<std::uint64_t, 4>& state() const { return state_; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_ = 0;
  std::uint64_t draws_ = 0;
};

/// Fisher-Yates shuffle driven by the library Rng (std::shuffle's output is
/// not pinned by the standard).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace csishield
