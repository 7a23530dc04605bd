#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "countfield/rng.hpp"

using countfield::Rng;

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 64; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("substreams are deterministic and distinct") {
  Rng a = Rng::substream(7, 0);
  Rng b = Rng::substream(7, 0);
  Rng c = Rng::substream(7, 1);
  REQUIRE(a.next_u64() == b.next_u64());
  REQUIRE(a.next_u64() != c.next_u64());
}

TEST_CASE("uniform stays in the half-open unit interval") {
  Rng rng(1);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("normal sampler has unit moments") {
  Rng rng(2);
  const int n = 50000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(mean == Catch::Approx(0.0).margin(0.02));
  CHECK(var == Catch::Approx(1.0).margin(0.03));
}

TEST_CASE("binomial counts successes out of n trials") {
  Rng rng(3);
  const int n = 20000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const std::int64_t k = rng.binomial(10, 0.3);
    REQUIRE(k >= 0);
    REQUIRE(k <= 10);
    sum += static_cast<double>(k);
  }
  CHECK(sum / n == Catch::Approx(3.0).margin(0.05));
  CHECK(rng.binomial(0, 0.5) == 0);
}

TEST_CASE("poisson sampler matches mean and variance in both regimes") {
  // mean below and above the sampler's algorithm switch at 10
  for (const double mean : {0.5, 3.5, 50.0, 400.0}) {
    Rng rng(static_cast<std::uint64_t>(mean * 1000));
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::int64_t k = rng.poisson(mean);
      REQUIRE(k >= 0);
      sum += static_cast<double>(k);
      sum_sq += static_cast<double>(k) * static_cast<double>(k);
    }
    const double m = sum / n;
    const double v = sum_sq / n - m * m;
    CHECK(m == Catch::Approx(mean).epsilon(0.02));
    CHECK(v == Catch::Approx(mean).epsilon(0.05));
  }
}

TEST_CASE("poisson of zero mean is identically zero") {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) REQUIRE(rng.poisson(0.0) == 0);
}

TEST_CASE("uniform_index covers its range") {
  Rng rng(5);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto idx = rng.uniform_index(7);
    REQUIRE(idx < 7);
    ++hits[static_cast<int>(idx)];
  }
  for (int h : hits) CHECK(h > 800);
}
