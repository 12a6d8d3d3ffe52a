#pragma once

#include <cstdint>
#include <limits>

namespace tcfbm {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Stream identifiers so that independent model components never share draws.
enum class Stream : std::uint64_t {
  fbm = 1,
  clock = 2,
  v_process = 3,
  brownian = 4,
  lhs = 11,
  rhs = 12,
  rhs_aux = 13,
  z_factor = 14,
  fbm_coord = 100,
  clock_coord = 200,
};

inline Stream coord_stream(Stream base, std::size_t i) {
  return static_cast<Stream>(static_cast<std::uint64_t>(base) + i);
}

/// Independent base seed for a role (LHS, RHS, ...) derived from a user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, Stream role) {
  std::uint64_t sm = seed ^ (static_cast<std::uint64_t>(role) * 0x9FB21C651E98DF25ULL);
  splitmix64(sm);
  return splitmix64(sm);
}

/**
 * @brief xoshiro256** seeded from (seed, stream, index) through splitmix64.
 *
 * Path i of a batch depends only on its own key, never on batch size or thread layout.
 */
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, Stream stream = Stream::fbm, std::uint64_t index = 0) {
    std::uint64_t sm = seed;
    std::uint64_t a = splitmix64(sm);
    sm = a ^ (static_cast<std::uint64_t>(stream) * 0xD1342543DE82EF95ULL);
    std::uint64_t b = splitmix64(sm);
    sm = b ^ (index * 0xA24BAED4963EE407ULL + 0x632BE59BD9B4E019ULL);
    for (auto& w : s_) w = splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
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

  /// Uniform on the open interval (0,1).
  double uniform_open() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

}  // namespace tcfbm
