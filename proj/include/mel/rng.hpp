#pragma once

#include <array>
#include <cstdint>

#include "mel/stats.hpp"

namespace mel::rng {

/// Philox4x32-10 counter-based generator (Salmon, Moraes, Dror, Shaw 2011).
/// A 128-bit counter and 64-bit key map to four 32-bit words; distinct
/// (counter, key) pairs give independent outputs, which is what makes
/// parallel replication streams reproducible regardless of scheduling.
struct Philox4x32 {
  static constexpr std::uint32_t kMult0 = 0xD2511F53u;
  static constexpr std::uint32_t kMult1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t(kMult0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(kMult1) * ctr[2];
      ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
             std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

/// One deterministic stream of doubles, identified by (seed, stream id).
///
/// Stream-splitting convention used throughout the simulation code:
///   key     = 64-bit master seed
///   counter = [draw index (64 bits) | stream id (64 bits)]
/// where stream id packs a draw-kind tag in the high byte and the
/// replication index below it (see make_stream_id). Every draw is a pure
/// function of (seed, stream, index), so results do not depend on thread
/// count or execution order.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream_id)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
        hi_{std::uint32_t(stream_id), std::uint32_t(stream_id >> 32)} {}

  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform() {
    if (buffered_ == 0) refill();
    return buffer_[--buffered_];
  }

  /// Standard normal via the inverse-CDF transform of one uniform draw.
  double normal() { return stats::normal_quantile(uniform()); }

  /// Bernoulli(p).
  bool bernoulli(double p) { return uniform() < p; }

  /// Index into a discrete distribution given cumulative probabilities.
  int categorical(const double* cumulative, int count) {
    const double u = uniform();
    for (int k = 0; k + 1 < count; ++k) {
      if (u < cumulative[k]) return k;
    }
    return count - 1;
  }

 private:
  void refill() {
    const std::array<std::uint32_t, 4> ctr = {
        std::uint32_t(index_), std::uint32_t(index_ >> 32), hi_[0], hi_[1]};
    ++index_;
    const auto words = Philox4x32::block(ctr, key_);
    buffer_[1] = to_unit(words[0], words[1]);
    buffer_[0] = to_unit(words[2], words[3]);
    buffered_ = 2;
  }

  static double to_unit(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t bits = (std::uint64_t(a) << 32) | b;
    // 53 significant bits, shifted into (0,1) so inverse-CDF transforms
    // never see an endpoint.
    return (double(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 2> hi_;
  std::uint64_t index_ = 0;
  double buffer_[2] = {0, 0};
  int buffered_ = 0;
};

/// Stream id layout: [kind : 8 bits | replication : 56 bits].
inline std::uint64_t make_stream_id(std::uint64_t replication, std::uint8_t kind) {
  return (std::uint64_t(kind) << 56) | (replication & 0x00FFFFFFFFFFFFFFull);
}

}  // namespace mel::rng
