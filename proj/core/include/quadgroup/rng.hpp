#pragma once

#include <cstdint>
#include <array>

namespace quadgroup {

/// Roles identifying independent substreams within one (seed, replicate) pair.
enum class StreamRole : std::uint32_t {
  covariates = 0,  // design matrix draws
  noise = 1,       // regression error draws
  split = 2,       // sample-splitting permutation
  generic = 3,     // anything else (test helpers)
};

/// Philox4x32-10 counter block function. Stateless: maps (counter, key)
/// to four 32-bit words. Used as the base of all randomness in the
/// library so that streams are reproducible and replicate-addressable.
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

/// Deterministic random stream addressed by (seed, replicate, role).
///
/// The key holds the 64-bit seed; the counter holds (block index,
/// replicate, role). Distinct (seed, replicate, role) triples give
/// independent streams, and a stream's output does not depend on how
/// many other streams exist, so replicate r's data is unchanged when
/// the total replicate count changes.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t replicate, StreamRole role);

  /// Next 64-bit word.
  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, bound) without modulo bias. bound >= 1.
  std::uint64_t uniform_below(std::uint64_t bound);

  /// Standard normal draw via the Marsaglia polar method. Pairs are
  /// generated together and the spare is cached, so draws come two per
  /// accepted uniform pair.
  double gaussian();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint32_t replicate_lo_;
  std::uint32_t role_and_replicate_hi_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_words_ = 0;
  double gauss_spare_ = 0.0;
  bool has_gauss_spare_ = false;
};

}  // namespace quadgroup
