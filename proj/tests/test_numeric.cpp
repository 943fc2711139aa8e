#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "dvds/numeric.hpp"

using namespace dvds;

TEST_CASE("pairwise sum agrees with extended-precision accumulation") {
  Rng rng(5);
  for (std::size_t n : {0u, 1u, 7u, 16u, 17u, 1000u, 4099u}) {
    std::vector<double> v(n);
    long double ref = 0;
    for (auto& x : v) ref += (x = rng.uniform(-1e3, 1e3));
    CHECK(pairwise_sum(v) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-13));
  }
}

TEST_CASE("normal quantile and density") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(normal_cdf(normal_quantile(0.8)) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(normal_pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)));
  CHECK_THROWS(normal_quantile(0.0));
  CHECK_THROWS(normal_quantile(1.0));
}

TEST_CASE("rng is reproducible and well-behaved") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
  }
  Rng r(1);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[r.below(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("derived seeds are distinct per stream") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) seen.insert(derive_seed(9, s));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}

TEST_CASE("parallel_for visits each index once for any thread count") {
  for (unsigned t : {1u, 2u, 8u}) {
    std::vector<std::atomic<int>> hits(500);
    parallel_for(500, t, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  for (unsigned t : {1u, 4u}) {
    try {
      parallel_for(100, t, [](std::size_t i) {
        if (i % 30 == 7) throw std::runtime_error("index " + std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "index 7");
    }
  }
}
