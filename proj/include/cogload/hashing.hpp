#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <utility>

namespace cogload {

std::string sha256_hex(std::string_view bytes);

/// First eight bytes of SHA-256, big-endian. Stable across platforms.
std::uint64_t stable_hash64(std::string_view bytes);

/// SHA-256 over the raw bytes of a file.
std::string sha256_file_hex(const std::filesystem::path& path);

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Mixes a parent seed with a label so sibling streams never collide.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label) noexcept;
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept;

/// Seeded generator with distribution code that does not depend on the
/// standard library vendor, so runs reproduce bit-for-bit across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  /// Standard normal via Box-Muller.
  double normal();

  template <class RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cogload
