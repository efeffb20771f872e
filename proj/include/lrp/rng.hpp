#ifndef LRP_RNG_HPP
#define LRP_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace lrp {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

/// Derives a stream key from a base seed and an ordered list of tags
/// (distance class, block index, replicate index, ...). Different tag
/// tuples give statistically independent streams.
constexpr std::uint64_t derive_key(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  std::uint64_t salt = 0;
  for (std::uint64_t t : tags) {
    salt += kGoldenGamma;
    h = mix64(h ^ mix64(t + salt));
  }
  return h;
}

/// Counter-based generator: the n-th output of the stream with key k is a
/// pure function of (k, n). Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  constexpr explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr CounterRng stream(std::uint64_t seed,
                                     std::initializer_list<std::uint64_t> tags) noexcept {
    return CounterRng(derive_key(seed, tags));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGoldenGamma);
  }

  /// Uniform on (0, 1].
  constexpr double uniform_pos() noexcept {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform on [0, 1).
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer on [0, bound), bound > 0. Lemire's multiply-shift with
  /// rejection.
  std::uint64_t below(std::uint64_t bound) noexcept {
    for (;;) {
      const unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
      const auto low = static_cast<std::uint64_t>(m);
      if (low >= bound || low >= (-bound) % bound) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace lrp

#endif  // LRP_RNG_HPP
