#pragma once

#include <cstdint>

namespace dbose {

// Philox4x32-10 counter-based generator. A stream is (seed, stream_id);
// identical (seed, stream, position) yields identical output on every
// platform, which is what makes block-parallel Monte Carlo reproducible.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)),
        ctr2_(static_cast<std::uint32_t>(stream)),
        ctr3_(static_cast<std::uint32_t>(stream >> 32)) {}

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // uniform in [0, 1), 53-bit resolution
  double uniform();
  // uniform in (0, 1], safe for log()
  double uniform_pos() { return 1.0 - uniform(); }
  // standard normal (Box-Muller, cached pair)
  double normal();
  // Gamma(1/2, 1) via normal^2 / 2
  double gamma_half() {
    const double z = normal();
    return 0.5 * z * z;
  }

 private:
  void refill();

  std::uint32_t key0_, key1_;
  std::uint32_t ctr0_ = 0, ctr1_ = 0, ctr2_, ctr3_;
  std::uint32_t buf_[4] = {0, 0, 0, 0};
  int have_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace dbose
