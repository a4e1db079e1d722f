#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mlmcdrop {

/// Sub-stream selector: mask draws and noise draws never share a stream.
enum class Lane : std::uint8_t { mask = 0, noise = 1 };

/// Address of one random stream. Distinct tuples give statistically
/// independent streams; the same tuple always replays the same sequence.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint32_t replicate = 0;  // outer replicate index m (1-based)
  std::uint32_t level = 0;      // ladder level index
  std::uint32_t inner = 0;      // inner draw index t (1-based)
  Lane lane = Lane::noise;

  constexpr StreamKey with_inner(std::uint32_t t) const {
    StreamKey k = *this;
    k.inner = t;
    return k;
  }
  constexpr StreamKey with_replicate(std::uint32_t m) const {
    StreamKey k = *this;
    k.replicate = m;
    return k;
  }
  constexpr StreamKey with_level(std::uint32_t l) const {
    StreamKey k = *this;
    k.level = l;
    return k;
  }
  constexpr StreamKey with_lane(Lane lane_) const {
    StreamKey k = *this;
    k.lane = lane_;
    return k;
  }
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer; full-avalanche 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Absorb one word into the running state with a nonlinear step between
// fields, so linear combinations of field values cannot collide.
constexpr std::uint64_t absorb(std::uint64_t h, std::uint64_t v) {
  return mix64(h + kGolden * (v + 1));
}

}  // namespace detail

/// Deterministic sub-seed for an indexed unit of work (grid point, sweep
/// entry). Distinct (master, index, salt) give independent streams.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                    std::uint64_t salt = 0) {
  std::uint64_t h = detail::mix64(master + detail::kGolden);
  h = detail::absorb(h, index);
  h = detail::absorb(h, salt);
  return h;
}

/// Counter-based generator over one stream. Construction is cheap; draws are
/// a pure function of (key, substream, counter), so replicates, levels and
/// inner indices can be evaluated in any order with identical results.
class CounterRng {
 public:
  explicit CounterRng(const StreamKey& key, std::uint64_t substream = 0) {
    using detail::absorb;
    std::uint64_t h = detail::mix64(key.seed + detail::kGolden);
    h = absorb(h, key.replicate);
    h = absorb(h, key.level);
    h = absorb(h, key.inner);
    h = absorb(h, static_cast<std::uint64_t>(key.lane));
    h = absorb(h, substream);
    state_ = h;
  }

  std::uint64_t next_u64() {
    return detail::mix64(state_ + detail::kGolden * counter_++);
  }

  /// Uniform draw in (0, 1]; never 0, safe under log().
  double next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes two words per draw.
  double next_gaussian() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
  std::uint64_t counter_ = 0;
};

}  // namespace mlmcdrop
