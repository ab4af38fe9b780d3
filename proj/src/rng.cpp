#include "dbose/rng.hpp"

#include <cmath>

namespace dbose {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::uint32_t mulhi(std::uint32_t a, std::uint32_t b, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  return static_cast<std::uint32_t>(p >> 32);
}

}  // namespace

void CounterRng::refill() {
  std::uint32_t c0 = ctr0_, c1 = ctr1_, c2 = ctr2_, c3 = ctr3_;
  std::uint32_t k0 = key0_, k1 = key1_;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, lo1;
    const std::uint32_t hi0 = mulhi(kPhiloxM0, c0, lo0);
    const std::uint32_t hi1 = mulhi(kPhiloxM1, c2, lo1);
    const std::uint32_t n0 = hi1 ^ c1 ^ k0;
    const std::uint32_t n1 = lo1;
    const std::uint32_t n2 = hi0 ^ c3 ^ k1;
    const std::uint32_t n3 = lo0;
    c0 = n0;
    c1 = n1;
    c2 = n2;
    c3 = n3;
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  buf_[0] = c0;
  buf_[1] = c1;
  buf_[2] = c2;
  buf_[3] = c3;
  have_ = 4;
  if (++ctr0_ == 0) ++ctr1_;  // 64-bit position counter; stream bits untouched
}

std::uint32_t CounterRng::next_u32() {
  if (have_ == 0) refill();
  return buf_[--have_];
}

std::uint64_t CounterRng::next_u64() {
  const std::uint64_t hi = next_u32();
  const std::uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = uniform_pos();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * M_PI * u2;
  cached_normal_ = r * std::sin(th);
  has_cached_normal_ = true;
  return r * std::cos(th);
}

}  // namespace dbose
