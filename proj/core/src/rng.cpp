#include "quadgroup/rng.hpp"

#include <cmath>

namespace quadgroup {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::uint32_t mulhi32(std::uint32_t a, std::uint32_t b) {
  return static_cast<std::uint32_t>((static_cast<std::uint64_t>(a) * b) >> 32);
}

inline void philox_round(std::array<std::uint32_t, 4>& ctr,
                         const std::array<std::uint32_t, 2>& key) {
  const std::uint32_t hi0 = mulhi32(kPhiloxM0, ctr[0]);
  const std::uint32_t lo0 = kPhiloxM0 * ctr[0];
  const std::uint32_t hi1 = mulhi32(kPhiloxM1, ctr[2]);
  const std::uint32_t lo1 = kPhiloxM1 * ctr[2];
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key) {
  std::array<std::uint32_t, 4> ctr = counter;
  std::array<std::uint32_t, 2> k = key;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kPhiloxW0;
      k[1] += kPhiloxW1;
    }
    philox_round(ctr, k);
  }
  return ctr;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t replicate, StreamRole role)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      replicate_lo_(static_cast<std::uint32_t>(replicate)),
      // role occupies the low byte; high bits of very large replicate
      // indices spill into the remaining 24 bits of the last word.
      role_and_replicate_hi_(static_cast<std::uint32_t>(role) |
                             (static_cast<std::uint32_t>(replicate >> 32) << 8)) {}

void CounterRng::refill() {
  const std::array<std::uint32_t, 4> counter = {
      static_cast<std::uint32_t>(block_),
      static_cast<std::uint32_t>(block_ >> 32),
      replicate_lo_,
      role_and_replicate_hi_,
  };
  buffer_ = philox4x32(counter, key_);
  ++block_;
  buffered_words_ = 4;
}

std::uint64_t CounterRng::next_u64() {
  if (buffered_words_ < 2) refill();
  const std::uint32_t lo = buffer_[4 - buffered_words_];
  const std::uint32_t hi = buffer_[5 - buffered_words_];
  buffered_words_ -= 2;
  return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::uniform_below(std::uint64_t bound) {
  // Rejection sampling on the top of the range to avoid modulo bias.
  const std::uint64_t limit = bound * (UINT64_MAX / bound);
  std::uint64_t draw;
  do {
    draw = next_u64();
  } while (draw >= limit);
  return draw % bound;
}

double CounterRng::gaussian() {
  if (has_gauss_spare_) {
    has_gauss_spare_ = false;
    return gauss_spare_;
  }
  double a, b, s;
  do {
    a = 2.0 * uniform() - 1.0;
    b = 2.0 * uniform() - 1.0;
    s = a * a + b * b;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  gauss_spare_ = b * scale;
  has_gauss_spare_ = true;
  return a * scale;
}

}  // namespace quadgroup
