#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "autodml/numeric.hpp"

namespace autodml {

// splitmix64; used to derive independent sub-stream seeds from a master seed
// so that parallel work items (replications, bootstrap blocks) are
// reproducible regardless of scheduling.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t w = (state += 0x9E3779B97F4A7C15ULL);
  w = (w ^ (w >> 30)) * 0xBF58476D1CE4E5B9ULL;
  w = (w ^ (w >> 27)) * 0x94D049BB133111EBULL;
  return w ^ (w >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
  std::uint64_t s = master ^ (0xD1B54A32D192ED03ULL * (tag + 1));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

// mt19937_64 has a fully specified output sequence, so every draw below is
// identical across platforms. Distribution mappings are spelled out instead
// of using std::*_distribution (those are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform on [0,1) with 53 random bits
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // uniform on (0,1); safe input for quantile transforms
  double uniform01_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_quantile(uniform01_open()); }

  bool bernoulli(double prob) { return uniform01() < prob; }

  // uniform integer in [0, bound) by rejection, bias-free
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = engine_();
      if (r >= threshold) return r % bound;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace autodml
