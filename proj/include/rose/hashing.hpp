#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rose {

// Hash constants are fixed so that bucket assignments, derived seeds and
// manifest hashes are bit-identical across platforms and compilers.
//
//   FNV-1a 64:  offset basis 0xcbf29ce484222325, prime 0x100000001b3
//   mix64:      SplitMix64 finalizer (0x9e3779b97f4a7c15,
//               0xbf58476d1ce4e5b9, 0x94d049bb133111eb)
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = kFnvOffset);
std::uint64_t mix64(std::uint64_t x);

// Order-sensitive combination of already-hashed parts.
std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v);

// Seed derivation from a master seed plus a list of string/integer tags.
// Used wherever a sub-computation needs its own stream so that results do
// not depend on execution order.
class SeedBuilder {
 public:
  explicit SeedBuilder(std::uint64_t master) : h_(mix64(master ^ kFnvOffset)) {}

  SeedBuilder& add(std::string_view tag) {
    h_ = hash_combine(h_, fnv1a64(tag));
    return *this;
  }
  SeedBuilder& add(std::uint64_t v) {
    h_ = hash_combine(h_, mix64(v));
    return *this;
  }
  std::uint64_t seed() const { return h_; }

 private:
  std::uint64_t h_;
};

std::string to_hex(std::uint64_t v);

// Seeded random source. The engine is std::mt19937_64 (fully specified by
// the standard); the distributions below are implemented here because the
// standard library distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Uniform double in [0, 1) with 53 random bits.
  double uniform();

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), returned in increasing order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace rose
