#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vaelab/tensor.hpp"

namespace vaelab::inline VAELAB_NS {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3", SC'11). Pure function of (counter, key).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Counter-based generator. The variate produced by draw number `n` of stream
/// `s` under seed `k` is a pure function of (k, s, n):
///
///   key     = (k & 0xffffffff, k >> 32)
///   counter = (n & 0xffffffff, n >> 32, s & 0xffffffff, s >> 32)
///
/// Every draw consumes exactly one Philox block, whatever its kind, so the
/// counter equals the number of draws taken so far.
///   uniform(): 53 bits from words 0-1, mapped to (0, 1) as (a + 0.5) / 2^53
///   normal():  Box-Muller on two such uniforms (words 0-1 and 2-3), cosine branch
///   below(n):  rejection sampling on the 64-bit value of words 0-1
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

  std::array<std::uint32_t, 4> next_block();

  double uniform();
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  Tensor normal_tensor(Shape shape);
  /// Fisher-Yates shuffle of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

/// Stream ids used inside one training run. Fixed so that runs are reproducible.
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kTrainEps = 3;
inline constexpr std::uint64_t kTestEps = 4;
inline constexpr std::uint64_t kGenLatent = 5;
inline constexpr std::uint64_t kGenEps = 6;
inline constexpr std::uint64_t kAugment = 7;
inline constexpr std::uint64_t kClassifierInit = 11;
inline constexpr std::uint64_t kClassifierShuffle = 12;
inline constexpr std::uint64_t kMetricsLatent = 21;
inline constexpr std::uint64_t kMetricsSelect = 22;
inline constexpr std::uint64_t kSampleGrid = 23;
}  // namespace streams

}  // namespace vaelab::inline VAELAB_NS
