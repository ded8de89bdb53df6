#ifndef CHIRPLINK_RNG_HPP
#define CHIRPLINK_RNG_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace chirplink {

// Deterministic stream splitting: every consumer derives its own stream
// from (seed, tag[, index]) so that adding a consumer never perturbs the
// draws seen by another. Distributions are hand-rolled on top of
// mt19937_64 to keep sequences identical across standard libraries.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0)
      : engine_(splitmix64(seed ^ splitmix64(hash_tag(tag) + index))) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int n) {  // in [0, n)
    return static_cast<int>(engine_() % static_cast<std::uint64_t>(n));
  }

  // Box-Muller with a cached spare; avoids std::normal_distribution so the
  // stream is implementation independent.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::vector<double> normal_vec(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = normal();
    return v;
  }

  std::vector<int> symbols(std::size_t n, int alphabet = 4) {
    std::vector<int> s(n);
    for (auto& x : s) x = uniform_int(alphabet);
    return s;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace chirplink

#endif  // CHIRPLINK_RNG_HPP
