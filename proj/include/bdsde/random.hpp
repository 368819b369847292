#ifndef BDSDE_RANDOM_HPP
#define BDSDE_RANDOM_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace bdsde {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A pure
/// function of (counter, key): any draw can be regenerated from its
/// coordinates, which is what makes coupled and parallel paths reproducible.
namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

constexpr Counter round(Counter c, Key k) noexcept {
  const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
  const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

constexpr Counter philox4x32_10(Counter c, Key k) noexcept {
  for (int i = 0; i < 10; ++i) {
    c = round(c, k);
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

constexpr Key key_from_seed(std::uint64_t seed) noexcept {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

constexpr Counter counter_from(std::uint64_t index, std::uint64_t stream) noexcept {
  return {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
}

}  // namespace philox

/// Maps two 32-bit words to a double strictly inside (0, 1).
constexpr double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 12;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

struct NormalPair {
  double first;
  double second;
};

/// Two independent standard normals addressed by (seed, stream, index).
inline NormalPair normal_pair(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
  const auto out = philox::philox4x32_10(philox::counter_from(index, stream), philox::key_from_seed(seed));
  const double u1 = to_open_unit(out[0], out[1]);
  const double u2 = to_open_unit(out[2], out[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(angle), r * std::sin(angle)};
}

/// Sequential view over one Philox stream, for samplers that consume an
/// unknown number of variates (rejection methods).
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(philox::key_from_seed(seed)), stream_(stream) {}

  double uniform() noexcept {
    if (pos_ >= 4) refill();
    const double u = to_open_unit(block_[pos_], block_[pos_ + 1]);
    pos_ += 2;
    return u;
  }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

 private:
  void refill() noexcept {
    block_ = philox::philox4x32_10(philox::counter_from(index_++, stream_), key_);
    pos_ = 0;
  }

  philox::Key key_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
  philox::Counter block_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bdsde

#endif  // BDSDE_RANDOM_HPP
