#pragma once

#include <cstdint>
#include <string_view>

#include "kra/matrix.hpp"

namespace kra {

// Identification string written into run manifests.
inline constexpr std::string_view kPrngName = "splitmix64-ctr/fnv1a64-streams/box-muller v1";

std::uint64_t splitmix64_mix(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

// Counter-based generator: output n is splitmix64_mix(key + (n+1) * golden).
// Streams are split by name, so each named tensor or trial draws from its own
// sequence regardless of the order in which other streams are consumed.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view name) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 random bits.
  double uniform01() noexcept;
  double uniform(double lo, double hi) noexcept;
  double normal() noexcept;
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  RandomStream split(std::string_view child) const noexcept;

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

DenseMatrix random_normal(std::size_t rows, std::size_t cols, RandomStream& stream);
DenseMatrix random_uniform(std::size_t rows, std::size_t cols, double lo, double hi,
                           RandomStream& stream);

}  // namespace kra
