#include "kra/random.hpp"

#include <cmath>
#include <numbers>

namespace kra {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
}

std::uint64_t splitmix64_mix(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

RandomStream::RandomStream(std::uint64_t seed, std::string_view name) noexcept
    : key_(splitmix64_mix(seed ^ fnv1a64(name))) {}

std::uint64_t RandomStream::next_u64() noexcept {
  ++counter_;
  return splitmix64_mix(key_ + counter_ * kGolden);
}

double RandomStream::uniform01() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

double RandomStream::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t RandomStream::below(std::uint64_t n) noexcept {
  // Lemire's multiply-shift; bias is below 2^-64 * n and irrelevant here.
  const unsigned __int128 product = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::uint64_t>(product >> 64);
}

RandomStream RandomStream::split(std::string_view child) const noexcept {
  return RandomStream(key_, child);
}

DenseMatrix random_normal(std::size_t rows, std::size_t cols, RandomStream& stream) {
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = stream.normal();
  return m;
}

DenseMatrix random_uniform(std::size_t rows, std::size_t cols, double lo, double hi,
                           RandomStream& stream) {
  DenseMatrix m(rows, cols);
  for (double& x : m.data()) x = stream.uniform(lo, hi);
  return m;
}

}  // namespace kra
