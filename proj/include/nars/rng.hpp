#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

namespace nars {

/// splitmix64 finalizer; used for seeding and stateless hashing.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent seed for a named sub-stream (iteration, stage, ...).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// xoshiro256** generator. Output is fully specified, so runs are reproducible
/// across standard libraries (unlike std::uniform_*_distribution).
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

  void reseed(std::uint64_t seed) noexcept {
    std::uint64_t x = seed;
    for (auto &word : s_) {
      x += 0x9e3779b97f4a7c15ULL;
      word = mix64(x);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Four hex words; round-trips through set_state().
  std::string state() const {
    std::string out;
    char buf[17];
    for (auto word : s_) {
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(word));
      if (!out.empty()) out += ' ';
      out += buf;
    }
    return out;
  }

  void set_state(const std::string &text) {
    std::size_t pos = 0;
    for (auto &word : s_) {
      std::size_t used = 0;
      word = std::stoull(text.substr(pos), &used, 16);
      pos += used;
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
};

/// Uniform double in [0, 1) from the top 53 bits of one draw.
template <class Gen>
double uniform01(Gen &gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Unbiased integer in [0, n) (n > 0) by rejection on the top of the range.
template <class Gen>
std::uint64_t uniform_index(Gen &gen, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % n;
}

}  // namespace nars
