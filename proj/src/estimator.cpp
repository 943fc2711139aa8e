#include "dvds/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "dvds/cvar.hpp"
#include "dvds/numeric.hpp"

namespace dvds {

std::vector<std::size_t> FoldPlan::members(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::complement(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != fold) out.push_back(i);
  }
  return out;
}

FoldPlan split_folds(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2 || folds > n) {
    throw DomainError("fold count K must satisfy 2 <= K <= n (K=" + std::to_string(folds) + ", n=" + std::to_string(n) + ")");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);

  FoldPlan plan;
  plan.folds = folds;
  plan.seed = seed;
  plan.assignment.resize(n);
  const std::size_t base = n / folds;
  const std::size_t extra = n % folds;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < folds; ++k) {
    const std::size_t size = base + (k < extra ? 1 : 0);
    for (std::size_t j = 0; j < size; ++j) plan.assignment[perm[pos++]] = k;
  }
  return plan;
}

namespace {

template <typename Fn>
auto annotate_fold(std::size_t fold, Fn&& fn) -> decltype(fn()) {
  const std::string prefix = "fold " + std::to_string(fold) + ": ";
  try {
    return fn();
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(prefix + e.what(), e.last_iterate());
  } catch (const DegenerateFitError& e) {
    throw DegenerateFitError(prefix + e.what());
  }
}

void crossfit_fold(const Dataset& data, std::span<const SensitivityParams> grid, const LearnerBundle& learners,
                   const FoldPlan& plan, double epsilon, std::size_t fold, std::vector<NuisanceSet>& out) {
  const auto train = plan.complement(fold);
  const auto test = plan.members(fold);
  annotate_fold(fold, [&] {
    std::array<std::size_t, 2> counts{0, 0};
    for (auto i : train) ++counts[static_cast<std::size_t>(data.z(i))];
    if (counts[0] == 0 || counts[1] == 0) {
      throw DegenerateFitError(std::string("training complement has no ") + (counts[1] == 0 ? "treated" : "control") +
                               " rows");
    }

    const auto e_hat = fit_propensity(data, train, learners.propensity);
    for (auto i : test) {
      const double e = clip_propensity(e_hat(data.x(i)), epsilon);
      for (auto& set : out) set.e_hat[i] = e;
    }

    if (data.outcome_kind() == OutcomeKind::Binary) {
      for (int arm = 0; arm < 2; ++arm) {
        const auto mu_hat = fit_outcome(data, train, arm, learners.binary_outcome);
        for (auto i : test) {
          const double mu = std::clamp(mu_hat(data.x(i)), 0.0, 1.0);
          for (std::size_t g = 0; g < grid.size(); ++g) {
            const auto b = binary_nuisances(mu, grid[g]);
            auto& a = out[g].arm[static_cast<std::size_t>(arm)];
            a.mu[i] = mu;
            a.q_plus[i] = b.q_plus;
            a.q_minus[i] = b.q_minus;
            a.rho_plus[i] = b.rho_plus;
            a.rho_minus[i] = b.rho_minus;
          }
        }
      }
      return 0;
    }

    for (int arm = 0; arm < 2; ++arm) {
      const auto armi = static_cast<std::size_t>(arm);
      if (learners.strategy == RhoStrategy::Separate) {
        const auto mu_hat = fit_outcome(data, train, arm, learners.regression);
        for (auto i : test) {
          const double mu = mu_hat(data.x(i));
          for (auto& set : out) set.arm[armi].mu[i] = mu;
        }
      }
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto& params = grid[g];
        auto& a = out[g].arm[armi];
        for (Side side : {Side::Upper, Side::Lower}) {
          const double level = side == Side::Upper ? params.tau() : 1.0 - params.tau();
          const auto q_hat = fit_quantile(data, train, arm, level, learners.quantile);
          const auto rho_hat = fit_rho(data, train, arm, q_hat, params, side, learners.regression, learners.strategy);
          auto& qv = a.q(side);
          auto& rv = a.rho(side);
          for (auto i : test) {
            qv[i] = q_hat(data.x(i));
            rv[i] = rho_hat(data.x(i));
          }
        }
      }
    }
    return 0;
  });
}

}  // namespace

std::vector<NuisanceSet> crossfit_nuisances_grid(const Dataset& data, std::span<const SensitivityParams> grid,
                                                 const LearnerBundle& learners, const FoldPlan& plan, double epsilon,
                                                 unsigned threads) {
  if (plan.rows() != data.rows()) throw DomainError("fold plan row count does not match the dataset");
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw DomainError("propensity clip epsilon must lie in (0, 0.5)");
  const bool with_mu = data.outcome_kind() == OutcomeKind::Binary || learners.strategy == RhoStrategy::Separate;
  std::vector<NuisanceSet> out(grid.size(), NuisanceSet(data.rows()));
  if (with_mu) {
    for (auto& set : out) {
      for (auto& a : set.arm) a.mu.assign(data.rows(), 0.0);
    }
  }
  parallel_for(plan.folds, threads,
               [&](std::size_t fold) { crossfit_fold(data, grid, learners, plan, epsilon, fold, out); });
  return out;
}

NuisanceSet crossfit_nuisances(const Dataset& data, const SensitivityParams& params, const LearnerBundle& learners,
                               const FoldPlan& plan, double epsilon, unsigned threads) {
  auto sets = crossfit_nuisances_grid(data, std::span<const SensitivityParams>(&params, 1), learners, plan, epsilon,
                                      threads);
  return std::move(sets.front());
}

namespace {

double phi_arm(double y, int z, const NuisanceRow& eta, const SensitivityParams& params, int arm, Side side) {
  const double q = eta.q(side, arm);
  const double rho = eta.rho(side, arm);
  const double kernel = weighting_kernel(y, q, params, side);
  if (arm == 1) {
    const double zz = z;
    return zz * y + (1.0 - zz) * rho + (1.0 - eta.e_hat) * zz / eta.e_hat * (kernel - rho);
  }
  const double cz = 1.0 - z;
  return cz * y + (1.0 - cz) * rho + eta.e_hat * cz / (1.0 - eta.e_hat) * (kernel - rho);
}

double standard_error(std::span<const double> values, double center, double denom) {
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - center;
    sq[i] = d * d;
  }
  return std::sqrt(pairwise_sum(sq) / denom);
}

void check_coverage(const Dataset& data, const NuisanceSet& eta) {
  if (eta.rows() != data.rows()) throw DomainError("nuisance set does not cover every row of the dataset");
  for (const auto& a : eta.arm) {
    if (a.q_plus.size() != data.rows() || a.q_minus.size() != data.rows() || a.rho_plus.size() != data.rows() ||
        a.rho_minus.size() != data.rows()) {
      throw DomainError("nuisance set does not cover every row of the dataset");
    }
  }
}

}  // namespace

double influence(double y, int z, const NuisanceRow& eta, const SensitivityParams& params, Estimand estimand,
                 Side side) {
  switch (estimand) {
    case Estimand::Mean1: return phi_arm(y, z, eta, params, 1, side);
    case Estimand::Mean0: return phi_arm(y, z, eta, params, 0, side);
    case Estimand::ATE: return phi_arm(y, z, eta, params, 1, side) - phi_arm(y, z, eta, params, 0, opposite(side));
    case Estimand::ATT: break;
  }
  throw DomainError("ATT has no per-row influence function; use att_bounds");
}

BoundEstimate estimate_bounds(const Dataset& data, const NuisanceSet& eta, const SensitivityParams& params,
                              Estimand estimand) {
  if (estimand == Estimand::ATT) return att_bounds(data, eta, params);
  check_coverage(data, eta);
  const std::size_t n = data.rows();
  if (n < 2) throw DomainError("standard errors need at least two rows");
  BoundEstimate est;
  est.estimand = estimand;
  est.lambda = params.lambda();
  est.n = n;
  est.influence_lower.resize(n);
  est.influence_upper.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = eta.row(i);
    est.influence_upper[i] = influence(data.y(i), data.z(i), row, params, estimand, Side::Upper);
    est.influence_lower[i] = influence(data.y(i), data.z(i), row, params, estimand, Side::Lower);
  }
  const double denom = static_cast<double>(n) * static_cast<double>(n - 1);
  est.psi_upper = mean(est.influence_upper);
  est.psi_lower = mean(est.influence_lower);
  est.se_upper = standard_error(est.influence_upper, est.psi_upper, denom);
  est.se_lower = standard_error(est.influence_lower, est.psi_lower, denom);
  return est;
}

BoundEstimate att_bounds(const Dataset& data, const NuisanceSet& eta, const SensitivityParams& params) {
  check_coverage(data, eta);
  const std::size_t n = data.rows();
  std::size_t treated = 0;
  for (std::size_t i = 0; i < n; ++i) treated += static_cast<std::size_t>(data.z(i));
  if (treated < 2) throw DegenerateFitError("ATT bounds need at least two treated rows");

  std::vector<double> phi0_upper(n), phi0_lower(n), z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = eta.row(i);
    phi0_upper[i] = phi_arm(data.y(i), data.z(i), row, params, 0, Side::Upper);
    phi0_lower[i] = phi_arm(data.y(i), data.z(i), row, params, 0, Side::Lower);
    z[i] = data.z(i);
  }
  const double y_bar = mean(data.outcome());
  const double z_bar = mean(z);
  const double psi0_upper = mean(phi0_upper);
  const double psi0_lower = mean(phi0_lower);

  BoundEstimate est;
  est.estimand = Estimand::ATT;
  est.lambda = params.lambda();
  est.n = n;
  est.psi_upper = (y_bar - psi0_lower) / z_bar;
  est.psi_lower = (y_bar - psi0_upper) / z_bar;
  est.influence_upper.resize(n);
  est.influence_lower.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    est.influence_upper[i] = data.y(i) - phi0_lower[i] - z[i] * est.psi_upper;
    est.influence_lower[i] = data.y(i) - phi0_upper[i] - z[i] * est.psi_lower;
  }
  const double n1 = static_cast<double>(treated);
  est.se_upper = standard_error(est.influence_upper, 0.0, n1 * (n1 - 1.0));
  est.se_lower = standard_error(est.influence_lower, 0.0, n1 * (n1 - 1.0));
  return est;
}

Interval wald_bounds(const BoundEstimate& est, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("Wald level alpha must lie in (0,1)");
  const double z = normal_quantile(1.0 - alpha);
  return {est.psi_lower - z * est.se_lower, est.psi_upper + z * est.se_upper};
}

double aipw(const Dataset& data, std::span<const double> e_hat, std::span<const double> mu1,
            std::span<const double> mu0) {
  const std::size_t n = data.rows();
  if (e_hat.size() != n || mu1.size() != n || mu0.size() != n) {
    throw DomainError("AIPW inputs must cover every row");
  }
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = data.z(i);
    const double y = data.y(i);
    terms[i] = mu1[i] - mu0[i] + z * (y - mu1[i]) / e_hat[i] - (1.0 - z) * (y - mu0[i]) / (1.0 - e_hat[i]);
  }
  return mean(terms);
}

ManskiBounds manski_bounds_binary(const Dataset& data) {
  if (data.outcome_kind() != OutcomeKind::Binary) throw DomainError("Manski bounds require a binary outcome");
  const std::size_t n = data.rows();
  std::vector<double> zy(n), zy_hi(n), cy(n), cy_hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = data.z(i);
    const double y = data.y(i);
    zy[i] = z * y;
    zy_hi[i] = z * y + (1.0 - z);
    cy[i] = (1.0 - z) * y;
    cy_hi[i] = (1.0 - z) * y + z;
  }
  ManskiBounds b;
  b.mean1 = {mean(zy), mean(zy_hi)};
  b.mean0 = {mean(cy), mean(cy_hi)};
  b.ate = {b.mean1.lower - b.mean0.upper, b.mean1.upper - b.mean0.lower};
  return b;
}

}  // namespace dvds
