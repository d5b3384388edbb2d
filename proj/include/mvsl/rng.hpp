#pragma once

// Deterministic random streams. A stream is identified by a root seed; named
// sub-streams are derived from the root and a tag, so draws from one stream
// never depend on how much another stream has consumed.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mvsl {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : root_(seed), gen_(splitmix(seed)) {}

  // Child stream derived from (root seed, tag), independent of draw history.
  Rng split(std::string_view tag) const { return Rng(splitmix(root_ ^ fnv1a(tag))); }
  Rng split(std::uint64_t index) const {
    return Rng(splitmix(root_ ^ (0x9e3779b97f4a7c15ULL + index)));
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> d(mean, stddev);
    return d(gen_);
  }

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(gen_);
  }

  std::uint64_t integer() { return gen_(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    std::uniform_int_distribution<std::uint64_t> d(0, n - 1);
    return d(gen_);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), gen_);
  }

  std::uint64_t root() const { return root_; }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::uint64_t root_;
  std::mt19937_64 gen_;
};

}  // namespace mvsl
