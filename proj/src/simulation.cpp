#include "dvds/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "dvds/cvar.hpp"
#include "dvds/numeric.hpp"

namespace dvds {

std::string_view to_string(GenerativeKind kind) noexcept {
  switch (kind) {
    case GenerativeKind::PaperBinary: return "paper_binary";
    case GenerativeKind::PaperContinuous: return "paper_continuous";
    case GenerativeKind::CustomDiscrete: return "custom_discrete";
  }
  return "unknown";
}

GenerativeKind parse_generative_kind(std::string_view name) {
  if (name == "paper_binary") return GenerativeKind::PaperBinary;
  if (name == "paper_continuous") return GenerativeKind::PaperContinuous;
  throw DomainError("unknown simulation design '" + std::string(name) + "' (expected paper_binary or paper_continuous)");
}

OutcomeKind GenerativeSpec::outcome_kind() const noexcept {
  return kind == GenerativeKind::PaperBinary ? OutcomeKind::Binary : OutcomeKind::Continuous;
}

namespace paper {

namespace {
double logistic_of_neg(double s) noexcept { return 1.0 / (1.0 + std::exp(s)); }
double sign(double t) noexcept { return t >= 0.0 ? 1.0 : -1.0; }
}  // namespace

double propensity(std::span<const double> x) noexcept {
  return logistic_of_neg(x[0] + 0.5 * (x[1] > 0.0 ? 1.0 : 0.0) + 0.5 * x[1] * x[2]);
}

double binary_mean(std::span<const double> x) noexcept { return logistic_of_neg(0.5 * x[0] + x[1] + 0.25 * x[1] * x[2]); }

double continuous_mean(std::span<const double> x) noexcept { return 2.0 * sign(x[0]) + x[1] + x[1] * x[2]; }

double continuous_sd(std::span<const double> x) noexcept { return 1.0 + x[3] * x[3]; }

}  // namespace paper

Dataset simulate(const GenerativeSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("sample size must be >= 1");
  if (spec.kind == GenerativeKind::CustomDiscrete) {
    if (!spec.custom) throw DomainError("custom_discrete design needs a DiscreteDGP");
    return sample_discrete(*spec.custom, n, seed);
  }
  Rng rng(seed);
  RowMatrix x(static_cast<Eigen::Index>(n), 5);
  std::vector<std::uint8_t> z(n);
  std::vector<double> y(n);
  const bool binary = spec.kind == GenerativeKind::PaperBinary;
  double row[5];
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < 5; ++j) {
      row[j] = rng.uniform(-1.0, 1.0);
      x(static_cast<Eigen::Index>(i), j) = row[j];
    }
    const std::span<const double> xi(row, 5);
    z[i] = rng.uniform() < paper::propensity(xi) ? 1 : 0;
    if (binary) {
      y[i] = rng.uniform() < paper::binary_mean(xi) ? 1.0 : 0.0;
    } else {
      y[i] = paper::continuous_mean(xi) + paper::continuous_sd(xi) * rng.normal();
    }
  }
  return Dataset(std::move(x), std::move(z), std::move(y), spec.outcome_kind(), {"x1", "x2", "x3", "x4", "x5"});
}

const Interval& SharpBounds::get(Estimand e) const noexcept {
  switch (e) {
    case Estimand::Mean1: return mean1;
    case Estimand::Mean0: return mean0;
    case Estimand::ATE: return ate;
    case Estimand::ATT: return att;
  }
  return ate;
}

namespace {

// 20-point Gauss–Legendre per panel; every integrand below is analytic on
// each panel, so this is accurate to near machine precision.
using Gauss = boost::math::quadrature::gauss<double, 20>;

template <typename F>
double integrate_panels(F&& f, double a, double b, std::vector<double> cuts) {
  cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [&](double c) { return !(c > a && c < b); }), cuts.end());
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  double lo = a;
  for (double c : cuts) {
    if (c > lo) total += Gauss::integrate(f, lo, c);
    lo = c;
  }
  total += Gauss::integrate(f, lo, b);
  return total;
}

// E[g(X₁,X₂,X₃)] for X uniform on [−1,1]³, with x₂ split at 0 and x₁ split
// at caller-provided points (which may depend on x₂, x₃).
template <typename G, typename Cuts>
double expect3(G&& g, Cuts&& x1_cuts) {
  auto over_x2 = [&](double x2) {
    auto over_x3 = [&](double x3) {
      auto over_x1 = [&](double x1) { return g(x1, x2, x3); };
      return integrate_panels(over_x1, -1.0, 1.0, x1_cuts(x2, x3));
    };
    return Gauss::integrate(over_x3, -1.0, 1.0);
  };
  return integrate_panels(over_x2, -1.0, 1.0, {0.0}) / 8.0;
}

// E[g(X₁..X₄)] with splits at x₁ = 0 and x₂ = 0.
template <typename G>
double expect4(G&& g) {
  auto over_x4 = [&](double x4) {
    auto over_x2 = [&](double x2) {
      auto over_x3 = [&](double x3) {
        auto over_x1 = [&](double x1) { return g(x1, x2, x3, x4); };
        return integrate_panels(over_x1, -1.0, 1.0, {0.0});
      };
      return Gauss::integrate(over_x3, -1.0, 1.0);
    };
    return integrate_panels(over_x2, -1.0, 1.0, {0.0});
  };
  return Gauss::integrate(over_x4, -1.0, 1.0) / 16.0;
}

SharpBounds assemble(double psi1_up, double psi1_lo, double psi0_up, double psi0_lo, double mean_y, double mean_z) {
  SharpBounds b;
  b.mean1 = {psi1_lo, psi1_up};
  b.mean0 = {psi0_lo, psi0_up};
  b.ate = {psi1_lo - psi0_up, psi1_up - psi0_lo};
  b.att = {(mean_y - psi0_up) / mean_z, (mean_y - psi0_lo) / mean_z};
  return b;
}

SharpBounds binary_truth(const SensitivityParams& params) {
  const double log_lam = std::log(params.lambda());
  auto cuts = [log_lam](double x2, double x3) {
    // μ crosses 1/(Λ+1) and Λ/(Λ+1) where 0.5x₁ + x₂ + 0.25x₂x₃ = ±log Λ.
    const double base = x2 + 0.25 * x2 * x3;
    return std::vector<double>{2.0 * (log_lam - base), 2.0 * (-log_lam - base)};
  };
  auto at = [&](auto&& h) {
    return expect3(
        [&](double x1, double x2, double x3) {
          const double x[5] = {x1, x2, x3, 0.0, 0.0};
          const double e = paper::propensity(x);
          const double mu = paper::binary_mean(x);
          const auto b = binary_nuisances(mu, params);
          return h(e, mu, b);
        },
        cuts);
  };
  const double psi1_up = at([](double e, double mu, const BinaryNuisances& b) { return e * mu + (1 - e) * b.rho_plus; });
  const double psi1_lo = at([](double e, double mu, const BinaryNuisances& b) { return e * mu + (1 - e) * b.rho_minus; });
  const double psi0_up = at([](double e, double mu, const BinaryNuisances& b) { return (1 - e) * mu + e * b.rho_plus; });
  const double psi0_lo = at([](double e, double mu, const BinaryNuisances& b) { return (1 - e) * mu + e * b.rho_minus; });
  const double mean_y = at([](double, double mu, const BinaryNuisances&) { return mu; });
  const double mean_z = at([](double e, double, const BinaryNuisances&) { return e; });
  return assemble(psi1_up, psi1_lo, psi0_up, psi0_lo, mean_y, mean_z);
}

SharpBounds continuous_truth(const SensitivityParams& params) {
  // For Y ~ N(m, s²): CVaR± = m ± s·φ(Φ⁻¹(τ))/(1−τ), so ρ± = m ± (1−Λ⁻¹)·s·c.
  const double c = params.lambda() == 1.0 ? 0.0 : normal_pdf(normal_quantile(params.tau())) * params.tail_weight();
  const double k = (1.0 - 1.0 / params.lambda()) * c;
  auto at = [&](auto&& h) {
    return expect4([&](double x1, double x2, double x3, double x4) {
      const double x[5] = {x1, x2, x3, x4, 0.0};
      const double e = paper::propensity(x);
      const double m = paper::continuous_mean(x);
      const double s = paper::continuous_sd(x);
      return h(e, m, m + k * s, m - k * s);
    });
  };
  const double psi1_up = at([](double e, double m, double rp, double) { return e * m + (1 - e) * rp; });
  const double psi1_lo = at([](double e, double m, double, double rm) { return e * m + (1 - e) * rm; });
  const double psi0_up = at([](double e, double m, double rp, double) { return (1 - e) * m + e * rp; });
  const double psi0_lo = at([](double e, double m, double, double rm) { return (1 - e) * m + e * rm; });
  const double mean_y = at([](double, double m, double, double) { return m; });
  const double mean_z = at([](double e, double, double, double) { return e; });
  return assemble(psi1_up, psi1_lo, psi0_up, psi0_lo, mean_y, mean_z);
}

}  // namespace

SharpBounds true_sharp_bounds(const GenerativeSpec& spec, const SensitivityParams& params) {
  switch (spec.kind) {
    case GenerativeKind::PaperBinary: return binary_truth(params);
    case GenerativeKind::PaperContinuous: return continuous_truth(params);
    case GenerativeKind::CustomDiscrete: {
      if (!spec.custom) throw DomainError("custom_discrete design needs a DiscreteDGP");
      SharpBounds b;
      b.mean1 = sharp_bound_oracle(*spec.custom, params, Estimand::Mean1);
      b.mean0 = sharp_bound_oracle(*spec.custom, params, Estimand::Mean0);
      b.ate = sharp_bound_oracle(*spec.custom, params, Estimand::ATE);
      b.att = sharp_bound_oracle(*spec.custom, params, Estimand::ATT);
      return b;
    }
  }
  throw DomainError("unknown generative kind");
}

LearnerBundle oracle_learners(GenerativeKind kind) {
  if (kind == GenerativeKind::CustomDiscrete) throw DomainError("oracle learners exist only for the benchmark designs");
  LearnerBundle b;
  b.propensity = LearnerSpec::injection([](std::span<const double> x, const InjectionQuery&) { return paper::propensity(x); });
  b.binary_outcome =
      LearnerSpec::injection([](std::span<const double> x, const InjectionQuery&) { return paper::binary_mean(x); });
  b.quantile = LearnerSpec::injection([](std::span<const double> x, const InjectionQuery& q) {
    return paper::continuous_mean(x) + paper::continuous_sd(x) * normal_quantile(q.alpha);
  });
  // ρ±(x) = m ± (1−Λ⁻¹)·s·c(τ); at Λ = 1 this is μ, so the same function
  // serves outcome-regression requests.
  b.regression = LearnerSpec::injection([](std::span<const double> x, const InjectionQuery& q) {
    const double m = paper::continuous_mean(x);
    if (q.lambda == 1.0) return m;
    const SensitivityParams params(q.lambda);
    const double c = normal_pdf(normal_quantile(params.tau())) * params.tail_weight();
    return m + side_sign(q.side) * (1.0 - 1.0 / q.lambda) * paper::continuous_sd(x) * c;
  });
  return b;
}

CoverageReport monte_carlo_coverage(const CoverageConfig& config) {
  if (config.reps == 0) throw DomainError("coverage needs at least one replication");
  if (config.lambdas.empty()) throw DomainError("coverage needs at least one lambda");
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  if (config.folds < 2 || config.folds > config.n) throw DomainError("fold count K must satisfy 2 <= K <= n");

  std::vector<SensitivityParams> grid;
  std::vector<SharpBounds> truth;
  for (double lam : config.lambdas) {
    grid.emplace_back(lam);
    truth.push_back(true_sharp_bounds(config.spec, grid.back()));
  }
  const std::size_t g = grid.size();

  CoverageReport report;
  report.seed = config.seed;
  report.records.resize(config.reps * g);

  parallel_for(config.reps, config.threads, [&](std::size_t rep) {
    const std::uint64_t data_seed = derive_seed(config.seed, 2 * rep);
    const std::uint64_t fold_seed = derive_seed(config.seed, 2 * rep + 1);
    for (std::size_t j = 0; j < g; ++j) {
      auto& r = report.records[rep * g + j];
      r.rep = rep;
      r.data_seed = data_seed;
      r.fold_seed = fold_seed;
      r.lambda = config.lambdas[j];
    }
    try {
      const Dataset data = simulate(config.spec, config.n, data_seed);
      const FoldPlan plan = split_folds(config.n, config.folds, fold_seed);
      const auto sets = crossfit_nuisances_grid(data, grid, config.learners, plan, config.epsilon, 1);
      for (std::size_t j = 0; j < g; ++j) {
        const auto est = estimate_bounds(data, sets[j], grid[j], config.estimand);
        const auto ci = wald_bounds(est, config.alpha / 2.0);
        const auto& target = truth[j].get(config.estimand);
        auto& r = report.records[rep * g + j];
        r.psi_lower = est.psi_lower;
        r.psi_upper = est.psi_upper;
        r.se_lower = est.se_lower;
        r.se_upper = est.se_upper;
        r.ci_lower = ci.lower;
        r.ci_upper = ci.upper;
        r.covered = ci.lower <= target.lower && ci.upper >= target.upper;
      }
    } catch (const Error& e) {
      for (std::size_t j = 0; j < g; ++j) {
        auto& r = report.records[rep * g + j];
        r.failed = true;
        r.error = e.what();
      }
    }
  });

  std::size_t failed_reps = 0;
  for (std::size_t rep = 0; rep < config.reps; ++rep) failed_reps += report.records[rep * g].failed ? 1 : 0;
  if (failed_reps * 100 > config.reps) {
    std::string first;
    for (const auto& r : report.records) {
      if (r.failed) {
        first = r.error;
        break;
      }
    }
    throw HarnessError(std::to_string(failed_reps) + " of " + std::to_string(config.reps) +
                       " replications failed (more than 1%); first failure: " + first);
  }

  for (std::size_t j = 0; j < g; ++j) {
    CoverageEntry entry;
    entry.lambda = config.lambdas[j];
    entry.estimand = config.estimand;
    entry.replications = config.reps;
    entry.failures = failed_reps;
    const auto& target = truth[j].get(config.estimand);
    entry.truth_lower = target.lower;
    entry.truth_upper = target.upper;
    std::vector<double> lo, up, width, hit;
    for (std::size_t rep = 0; rep < config.reps; ++rep) {
      const auto& r = report.records[rep * g + j];
      if (r.failed) continue;
      lo.push_back(r.psi_lower);
      up.push_back(r.psi_upper);
      width.push_back(r.ci_upper - r.ci_lower);
      hit.push_back(r.covered ? 1.0 : 0.0);
    }
    if (!hit.empty()) {
      entry.bias_lower = mean(lo) - target.lower;
      entry.bias_upper = mean(up) - target.upper;
      entry.coverage = mean(hit);
      entry.mean_width = mean(width);
    }
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace dvds
