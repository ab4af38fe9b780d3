#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dbose/rng.hpp"

using namespace dbose;

TEST_CASE("identical (seed, stream) reproduces bit-identical output") {
  CounterRng a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct streams are distinct") {
  CounterRng a(42, 0), b(42, 1);
  int same = 0;
  for (int i = 0; i < 256; ++i)
    if (a.next_u32() == b.next_u32()) ++same;
  CHECK(same < 3);
}

TEST_CASE("uniform moments") {
  CounterRng r(123, 0);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    s1 += u;
    s2 += u * u;
  }
  // mean 1/2 +- 5 sigma, second moment 1/3 +- 5 sigma
  CHECK(std::abs(s1 / n - 0.5) < 5.0 / std::sqrt(12.0 * n));
  CHECK(std::abs(s2 / n - 1.0 / 3.0) < 5.0 * 0.3 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("normal moments") {
  CounterRng r(7, 0);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  CHECK(std::abs(s1 / n) < 5.0 / std::sqrt(static_cast<double>(n)));
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("gamma(1/2) sampler has mean 1/2 and variance 1/2") {
  CounterRng r(99, 3);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = r.gamma_half();
    s1 += g;
    s2 += g * g;
  }
  const double mean = s1 / n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
  CHECK(s2 / n - mean * mean == doctest::Approx(0.5).epsilon(0.05));
}
