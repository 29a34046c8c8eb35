#pragma once

// Portable deterministic random streams.
//
// Every stochastic component draws from Xoshiro256** seeded through SplitMix64,
// so results are bit-identical across compilers and standard libraries (the
// std:: distributions are implementation-defined and are not used). Normal
// variates use the Box-Muller transform on 53-bit uniforms.

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace satsrail {

// Independent stream tags, mixed into derived seeds.
enum class StreamTag : std::uint64_t {
  kMarket = 0x6d61726b6574ULL,
  kPayments = 0x7061796d656e74ULL,
  kChurn = 0x636875726eULL,
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

// Hash-combines an arbitrary list of words into a single seed.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words) noexcept;

// FNV-1a 64-bit, used for stable string keys (merchant ids) and report hashes.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

class Xoshiro256ss {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256ss(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform01() noexcept;
  // Uniform in (0, 1], safe as a log() argument.
  double uniform_open_low() noexcept;
  double standard_normal() noexcept;
  // Uniform integer in [0, n) by rejection; n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  std::uint64_t s_[4];
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace satsrail
