#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "dvds/cvar.hpp"
#include "dvds/nuisance.hpp"
#include "dvds/numeric.hpp"

using namespace dvds;

namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

// x ~ U(-1,1)^d, z and y supplied per row by callbacks.
template <typename ZF, typename YF>
Dataset make_data(std::size_t n, std::size_t d, std::uint64_t seed, ZF zf, YF yf,
                  OutcomeKind kind = OutcomeKind::Continuous) {
  Rng rng(seed);
  RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<std::uint8_t> z(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) row[j] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.uniform(-1, 1);
    z[i] = zf(row, rng);
    y[i] = yf(row, z[i], rng);
  }
  return Dataset(std::move(x), std::move(z), std::move(y), kind);
}

}  // namespace

TEST_CASE("learner spec validation") {
  auto s = LearnerSpec::ridge();
  s.regularization = -1;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = LearnerSpec::logistic();
  s.max_iterations = 0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = LearnerSpec::pinball();
  s.tolerance = 0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  LearnerSpec inj;
  inj.kind = LearnerKind::OracleInjection;
  CHECK_THROWS_AS(inj.validate(), DomainError);
  CHECK(parse_learner_kind("pinball_linear") == LearnerKind::PinballLinear);
  CHECK(parse_feature_expansion(to_string(FeatureExpansion::RawPlusPairwise)) == FeatureExpansion::RawPlusPairwise);
  CHECK(parse_rho_strategy("direct") == RhoStrategy::Direct);
}

TEST_CASE("feature expansion adds pairwise interactions") {
  CHECK(expanded_dimension(5, FeatureExpansion::RawPlusPairwise) == 15);
  CHECK(expanded_dimension(5, FeatureExpansion::Raw) == 5);
  const double x[3] = {2.0, 3.0, 5.0};
  std::vector<double> out(expanded_dimension(3, FeatureExpansion::RawPlusPairwise));
  expand_features(x, FeatureExpansion::RawPlusPairwise, out);
  CHECK(out == std::vector<double>{2, 3, 5, 6, 10, 15});
}

TEST_CASE("propensity: separable data recovers the direction") {
  const auto d = make_data(
      100, 2, 1, [](const std::vector<double>& x, Rng&) { return x[0] > 0 ? 1 : 0; },
      [](const std::vector<double>&, int, Rng&) { return 0.0; });
  auto spec = LearnerSpec::logistic(1e-3);
  spec.features = FeatureExpansion::Raw;
  const auto e = fit_propensity(d, all_rows(100), spec);
  for (double t = -0.95; t <= 0.95; t += 0.1) {
    const double x[2] = {t, 0.3};
    const double p = e(x);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK((p >= 0.5) == (t > 0));
  }
}

TEST_CASE("propensity: constant learner returns the treated share") {
  const auto d = make_data(
      50, 1, 2, [](const std::vector<double>&, Rng& r) { return r.uniform() < 0.3 ? 1 : 0; },
      [](const std::vector<double>&, int, Rng&) { return 0.0; });
  double share = 0;
  for (std::size_t i = 0; i < 50; ++i) share += d.z(i);
  const auto e = fit_propensity(d, all_rows(50), LearnerSpec::constant());
  const double x[1] = {0.2};
  CHECK(e(x) == doctest::Approx(share / 50));
}

TEST_CASE("propensity: single treatment value is degenerate") {
  const auto d = make_data(
      20, 1, 3, [](const std::vector<double>&, Rng&) { return 1; }, [](const std::vector<double>&, int, Rng&) { return 0.0; });
  CHECK_THROWS_AS(fit_propensity(d, all_rows(20), LearnerSpec::logistic()), DegenerateFitError);
}

TEST_CASE("propensity: iteration cap raises convergence error with last iterate") {
  const auto d = make_data(
      300, 2, 4, [](const std::vector<double>& x, Rng& r) { return r.uniform() < 1 / (1 + std::exp(-3 * x[0])) ? 1 : 0; },
      [](const std::vector<double>&, int, Rng&) { return 0.0; });
  auto spec = LearnerSpec::logistic();
  spec.max_iterations = 1;
  try {
    fit_propensity(d, all_rows(300), spec);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.last_iterate().size() == 1 + expanded_dimension(2, spec.features));
  }
}

TEST_CASE("clip propensity") {
  CHECK(clip_propensity(0.001, 0.01) == 0.01);
  CHECK(clip_propensity(0.5, 0.01) == 0.5);
  CHECK(clip_propensity(0.9999, 0.02) == 0.98);
  CHECK_THROWS_AS(clip_propensity(0.5, 0.0), DomainError);
  CHECK_THROWS_AS(clip_propensity(0.5, 0.5), DomainError);
}

TEST_CASE("quantile: linear median under symmetric noise") {
  const auto d = make_data(
      5000, 1, 5, [](const std::vector<double>&, Rng&) { return 1; },
      [](const std::vector<double>& x, int, Rng& r) { return x[0] + r.normal(); });
  auto spec = LearnerSpec::pinball();
  spec.features = FeatureExpansion::Raw;
  const auto q = fit_quantile(d, all_rows(5000), 1, 0.5, spec);
  double err = 0;
  int k = 0;
  for (double t = -1.0; t <= 1.0; t += 0.05, ++k) {
    const double x[1] = {t};
    err += std::abs(q(x) - t);
  }
  CHECK(err / k < 0.15);
}

TEST_CASE("quantile: constant learner on {1,2,3}") {
  RowMatrix x(3, 1);
  x << 0, 1, 2;
  const Dataset d(x, {1, 1, 1}, {3.0, 1.0, 2.0}, OutcomeKind::Continuous);
  const auto q = fit_quantile(d, all_rows(3), 1, 0.5, LearnerSpec::constant());
  for (double t : {-5.0, 0.0, 7.0}) {
    const double xx[1] = {t};
    CHECK(q(xx) == 2.0);
  }
  CHECK_THROWS_AS(fit_quantile(d, all_rows(3), 1, 1.5, LearnerSpec::constant()), DomainError);
  CHECK_THROWS_AS(fit_quantile(d, all_rows(3), 0, 0.5, LearnerSpec::constant()), DegenerateFitError);
}

TEST_CASE("rho: separate strategy at lambda 1 equals the outcome regression") {
  const auto d = make_data(
      400, 3, 6, [](const std::vector<double>& x, Rng& r) { return r.uniform() < 0.5 + 0.3 * x[1] ? 1 : 0; },
      [](const std::vector<double>& x, int z, Rng& r) { return x[0] - x[1] * x[2] + z + r.normal(); });
  const auto rows = all_rows(400);
  const auto q = fit_quantile(d, rows, 1, 0.5, LearnerSpec::pinball(0.0, 200));
  const auto mu = fit_outcome(d, rows, 1, LearnerSpec::ridge());
  const auto rho = fit_rho(d, rows, 1, q, SensitivityParams(1.0), Side::Upper, LearnerSpec::ridge(), RhoStrategy::Separate);
  for (std::size_t i = 0; i < 50; ++i) CHECK(std::abs(rho(d.x(i)) - mu(d.x(i))) <= 1e-15);
}

TEST_CASE("rho: direct strategy on a single covariate level") {
  const std::size_t n = 40000;
  Rng rng(7);
  RowMatrix x = RowMatrix::Constant(n, 1, 0.25);
  std::vector<std::uint8_t> z(n, 1);
  std::vector<double> y(n);
  for (auto& v : y) v = rng.uniform() < 0.1 ? 10.0 : 0.0;
  const Dataset d(x, z, y, OutcomeKind::Continuous);
  const FittedPredictor q0([](std::span<const double>) { return 0.0; }, LearnerKind::Constant, n);
  auto spec = LearnerSpec::ridge(0.0);
  spec.features = FeatureExpansion::Raw;
  const auto rho = fit_rho(d, all_rows(n), 1, q0, SensitivityParams(2.0), Side::Upper, spec, RhoStrategy::Direct);
  // E[0.5·Y + 0.5·(0 + 3·Y₊)] = 0.5 + 1.5; the transformed outcome has sd ≤ 20.
  CHECK(std::abs(rho(d.x(0)) - 2.0) < 3.0 * 20.0 / std::sqrt(static_cast<double>(n)));
  CHECK_THROWS_AS(fit_rho(d, all_rows(n), 0, q0, SensitivityParams(2.0), Side::Upper, spec, RhoStrategy::Direct),
                  DegenerateFitError);
}

TEST_CASE("fits are deterministic") {
  const auto d = make_data(
      300, 3, 8, [](const std::vector<double>& x, Rng& r) { return r.uniform() < 0.5 + 0.3 * x[0] ? 1 : 0; },
      [](const std::vector<double>& x, int, Rng& r) { return x[1] + r.normal(); });
  const auto rows = all_rows(300);
  const auto a = fit_quantile(d, rows, 1, 0.8, LearnerSpec::pinball());
  const auto b = fit_quantile(d, rows, 1, 0.8, LearnerSpec::pinball());
  const auto ea = fit_propensity(d, rows, LearnerSpec::logistic());
  const auto eb = fit_propensity(d, rows, LearnerSpec::logistic());
  for (std::size_t i = 0; i < 300; ++i) {
    CHECK(a(d.x(i)) == b(d.x(i)));
    CHECK(ea(d.x(i)) == eb(d.x(i)));
  }
}

TEST_CASE("binary closed forms: examples") {
  const auto b = binary_nuisances(0.5, SensitivityParams(2.0));
  CHECK(b.q_plus == 1.0);
  CHECK(b.q_minus == 0.0);
  CHECK(b.rho_plus == doctest::Approx(0.75));
  CHECK(b.rho_minus == doctest::Approx(0.25));
  for (double l : {1.0, 3.0, 1e6}) {
    const auto z = binary_nuisances(0.0, SensitivityParams(l));
    CHECK(z.rho_plus == 0.0);
    CHECK(z.rho_minus == 0.0);
  }
  for (double mu : {0.0, 0.2, 0.5, 0.93, 1.0}) {
    const auto c = binary_nuisances(mu, SensitivityParams(1.0));
    CHECK(c.rho_plus == doctest::Approx(mu).epsilon(1e-15));
    CHECK(c.rho_minus == doctest::Approx(mu).epsilon(1e-15));
  }
  CHECK_THROWS_AS(binary_nuisances(1.2, SensitivityParams(2.0)), DomainError);
}

TEST_CASE("binary closed forms: two-point reweighting oracle") {
  // sup over Bernoulli(μ) reweightings with ratio in [1/Λ, Λ]: the mass on 1
  // is min(Λμ, 1 − (1−μ)/Λ).
  for (double mu = 0.0; mu <= 1.0; mu += 0.05) {
    for (double l : {1.0, 1.5, 2.0, 7.0}) {
      const auto b = binary_nuisances(mu, SensitivityParams(l));
      CHECK(b.rho_plus == doctest::Approx(std::min(l * mu, 1.0 - (1.0 - mu) / l)).epsilon(1e-13));
      CHECK(b.rho_minus == doctest::Approx(std::max(mu / l, 1.0 - l * (1.0 - mu))).epsilon(1e-13));
    }
  }
}

TEST_CASE("binary closed forms: properties and generic path agreement") {
  for (double mu = 0.0; mu <= 1.0 + 1e-12; mu += 0.01) {
    const double m = std::min(mu, 1.0);
    double prev_w = -1.0;
    for (double l : {1.0, 1.1, 1.5, 2.0, 3.0, 10.0, 1e6}) {
      const SensitivityParams p(l);
      const auto b = binary_nuisances(m, p);
      CHECK(b.rho_minus <= m + 1e-15);
      CHECK(m <= b.rho_plus + 1e-15);
      CHECK(b.rho_plus - b.rho_minus >= prev_w - 1e-15);
      prev_w = b.rho_plus - b.rho_minus;
      const auto dist = DiscreteDist::bernoulli(m);
      for (auto s : {Side::Upper, Side::Lower}) {
        const double generic = m / l + (1.0 - 1.0 / l) * cvar(dist, p, s);
        CHECK(std::abs(generic - (s == Side::Upper ? b.rho_plus : b.rho_minus)) <= 1e-12);
      }
    }
    if (m > 0.0) CHECK(binary_nuisances(m, SensitivityParams(1e12)).rho_plus == doctest::Approx(1.0).epsilon(1e-9));
    if (m < 1.0) CHECK(binary_nuisances(m, SensitivityParams(1e12)).rho_minus == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("injected learners receive the query") {
  const auto d = make_data(
      30, 2, 9, [](const std::vector<double>&, Rng& r) { return r.uniform() < 0.5 ? 1 : 0; },
      [](const std::vector<double>&, int, Rng& r) { return r.normal(); });
  const auto spec = LearnerSpec::injection([](std::span<const double> x, const InjectionQuery& q) {
    return x[0] + 10.0 * q.arm + 100.0 * q.alpha;
  });
  const auto q = fit_quantile(d, all_rows(30), 1, 0.75, spec);
  CHECK(q(d.x(0)) == doctest::Approx(d.x(0)[0] + 10.0 + 75.0));
}
