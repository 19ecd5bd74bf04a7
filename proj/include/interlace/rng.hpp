#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace interlace {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
// A stream is identified by (seed, stream index); the block counter walks
// through the stream, so any (seed, index) pair is independently addressable.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t position() const { return block_ * 4 + (4 - avail_); }

  // Independent sub-stream (e.g. one per trajectory within a replica).
  RngStream child(std::uint64_t index) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t hi = next32();
    return (hi << 32) | next32();
  }

  std::uint32_t next32() {
    if (avail_ == 0) refill();
    return buf_[4 - avail_--];
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n > 0 (Lemire's unbiased multiply-shift).
  std::uint32_t below(std::uint32_t n) {
    std::uint64_t m = std::uint64_t{next32()} * n;
    auto low = static_cast<std::uint32_t>(m);
    if (low < n) {
      const std::uint32_t threshold = (0u - n) % n;
      while (low < threshold) {
        m = std::uint64_t{next32()} * n;
        low = static_cast<std::uint32_t>(m);
      }
    }
    return static_cast<std::uint32_t>(m >> 32);
  }

  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> ctr,
                                             std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int avail_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace interlace
