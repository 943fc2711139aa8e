#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dvds/cvar.hpp"
#include "dvds/numeric.hpp"
#include "support.hpp"

using namespace dvds;
using testsupport::random_dist;

namespace {
const DiscreteDist kTwoPoint({0.0, 10.0}, {0.9, 0.1});
const SensitivityParams kL2(2.0);
}  // namespace

TEST_CASE("DiscreteDist validation") {
  CHECK_THROWS_AS(DiscreteDist({}, {}), DomainError);
  CHECK_THROWS_AS(DiscreteDist({1.0, 2.0}, {0.5}), DomainError);
  CHECK_THROWS_AS(DiscreteDist({1.0, 2.0}, {0.7, 0.7}), DomainError);
  CHECK_THROWS_AS(DiscreteDist({1.0, 2.0}, {1.1, -0.1}), DomainError);
  CHECK_THROWS_AS(DiscreteDist({std::nan(""), 2.0}, {0.5, 0.5}), DomainError);
  CHECK(DiscreteDist::bernoulli(0.3).mean() == doctest::Approx(0.3));
}

TEST_CASE("quantile: CDF walk examples") {
  const DiscreteDist u({1.0, 2.0, 3.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK(empirical_quantile(u, 0.5) == 2.0);
  CHECK(empirical_quantile(u, 1.0) == 3.0);
  CHECK(empirical_quantile(kTwoPoint, 2.0 / 3.0) == 0.0);
  CHECK_THROWS_AS(empirical_quantile(u, 0.0), DomainError);
  CHECK_THROWS_AS(empirical_quantile(u, 1.5), DomainError);
}

TEST_CASE("quantile: unsorted atoms and ties") {
  const DiscreteDist d({3.0, 1.0, 3.0, 2.0}, {0.25, 0.25, 0.25, 0.25});
  CHECK(empirical_quantile(d, 0.25) == 1.0);
  CHECK(empirical_quantile(d, 0.5) == 2.0);
  CHECK(empirical_quantile(d, 0.51) == 3.0);
}

TEST_CASE("cvar: two-point examples") {
  CHECK(cvar(kTwoPoint, kL2, Side::Upper) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(cvar(kTwoPoint, kL2, Side::Lower) == doctest::Approx(0.0).epsilon(1e-14));
  const DiscreteDist u({0.0, 10.0}, {0.5, 0.5});
  CHECK(cvar(u, SensitivityParams(1.0), Side::Upper) == doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("dual oracle examples") {
  CHECK(cvar_dual_oracle(kTwoPoint, kL2, Side::Upper) == doctest::Approx(3.0).epsilon(1e-14));
  for (double l : {1.0, 3.0, 100.0}) CHECK(cvar_dual_oracle(DiscreteDist::point(5.0), SensitivityParams(l), Side::Upper) == 5.0);
  const DiscreteDist pm({-1.0, 1.0}, {0.5, 0.5});
  CHECK(cvar_dual_oracle(pm, SensitivityParams(1e9), Side::Upper) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("transformed outcome and kernel examples") {
  CHECK(transformed_outcome(2.0, 1.0, kL2, Side::Upper) == doctest::Approx(3.0));
  CHECK(transformed_outcome(0.0, 1.0, kL2, Side::Upper) == doctest::Approx(0.5));
  CHECK(transformed_outcome(-3.7, 11.0, SensitivityParams(1.0), Side::Lower) == -3.7);
  CHECK(weighting_kernel(2.0, 1.0, kL2, Side::Upper) == doctest::Approx(3.0));
  CHECK(weighting_kernel(0.0, 1.0, kL2, Side::Upper) == doctest::Approx(0.5));
  for (double l : {1.0, 2.0, 50.0}) {
    CHECK(weighting_kernel(4.2, 4.2, SensitivityParams(l), Side::Upper) == 4.2);
    CHECK(weighting_kernel(4.2, 4.2, SensitivityParams(l), Side::Lower) == 4.2);
  }
  // Exact at Λ = 1 even where q + (y − q) rounds away from y.
  CHECK(weighting_kernel(0.1, 0.7, SensitivityParams(1.0), Side::Upper) == 0.1);
  CHECK(weighting_kernel(0.1, -0.3, SensitivityParams(1.0), Side::Lower) == 0.1);
}

TEST_CASE("property: kernel equals transformed outcome") {
  std::mt19937_64 g(17);
  std::uniform_real_distribution<double> v(-50.0, 50.0), l(1.0, 100.0);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double y = v(g), q = i % 10 == 0 ? y : v(g);
    const SensitivityParams p(l(g));
    for (auto s : {Side::Upper, Side::Lower}) {
      const double a = weighting_kernel(y, q, p, s), b = transformed_outcome(y, q, p, s);
      const double scale = std::max({std::abs(y), std::abs(q), 1.0}) * p.lambda();
      worst = std::max(worst, std::abs(a - b) / scale);
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("property: cvar equals greedy dual and minimum representation") {
  std::mt19937_64 g(3);
  for (int i = 0; i < 1000; ++i) {
    const auto d = random_dist(g, 12);
    for (double l : {1.0, 1.5, 2.0, 5.0}) {
      const SensitivityParams p(l);
      for (auto s : {Side::Upper, Side::Lower}) {
        CHECK(std::abs(cvar(d, p, s) - cvar_dual_oracle(d, p, s)) <= 1e-9);
      }
      CHECK(std::abs(cvar(d, p, Side::Upper) - testsupport::ru_cvar_upper(d.atoms(), d.weights(), l)) <= 1e-9);
    }
  }
}

TEST_CASE("property: cvar ordering and monotone gaps") {
  std::mt19937_64 g(4);
  for (int i = 0; i < 500; ++i) {
    const auto d = random_dist(g, 10);
    const double m = d.mean();
    double prev_up = -1.0, prev_lo = -1.0;
    for (double l : {1.0, 1.2, 2.0, 3.5, 10.0}) {
      const double up = cvar(d, SensitivityParams(l), Side::Upper) - m;
      const double lo = m - cvar(d, SensitivityParams(l), Side::Lower);
      CHECK(up >= -1e-12);
      CHECK(lo >= -1e-12);
      CHECK(up >= prev_up - 1e-12);
      CHECK(lo >= prev_lo - 1e-12);
      prev_up = up;
      prev_lo = lo;
    }
  }
}

TEST_CASE("property: the tau-quantile minimizes the expected transformed outcome") {
  std::mt19937_64 g(8);
  std::uniform_real_distribution<double> shift(-6.0, 6.0);
  for (int i = 0; i < 300; ++i) {
    const auto d = random_dist(g, 8);
    for (double l : {1.5, 2.0, 4.0}) {
      const SensitivityParams p(l);
      const double q_up = empirical_quantile(d, p.tau());
      const double q_lo = empirical_quantile(d, 1.0 - p.tau());
      const double best_up = d.expect([&](double y) { return transformed_outcome(y, q_up, p, Side::Upper); });
      const double best_lo = d.expect([&](double y) { return transformed_outcome(y, q_lo, p, Side::Lower); });
      for (int k = 0; k < 40; ++k) {
        const double q = shift(g);
        CHECK(best_up <= d.expect([&](double y) { return transformed_outcome(y, q, p, Side::Upper); }) + 1e-12);
        CHECK(best_lo >= d.expect([&](double y) { return transformed_outcome(y, q, p, Side::Lower); }) - 1e-12);
      }
    }
  }
}

TEST_CASE("property: quantile error enters the transformed outcome at second order") {
  // Discretized standard normal on a fine grid.
  std::vector<double> atoms, weights;
  const int m = 4001;
  for (int i = 0; i < m; ++i) {
    const double y = -8.0 + 16.0 * i / (m - 1);
    atoms.push_back(y);
    weights.push_back(normal_pdf(y));
  }
  double s = 0;
  for (double w : weights) s += w;
  for (double& w : weights) w /= s;
  const DiscreteDist d(atoms, weights);
  for (double l : {1.5, 2.0, 3.0}) {
    const SensitivityParams p(l);
    const double q = empirical_quantile(d, p.tau());
    auto value = [&](double qq) { return d.expect([&](double y) { return transformed_outcome(y, qq, p, Side::Upper); }); };
    const double base = value(q);
    std::vector<double> ratios;
    for (double delta : {0.1, 0.05, 0.025}) {
      for (double sgn : {-1.0, 1.0}) {
        const double err = value(q + sgn * delta) - base;
        CHECK(err >= -1e-12);
        ratios.push_back(err / (delta * delta));
      }
    }
    // Bounded by ΛM/2-type constant; the normal density is ≤ 0.4.
    for (double r : ratios) CHECK(r <= l * 0.5);
    CHECK(ratios[4] <= 1.5 * ratios[0] + 1e-3);
  }
}
