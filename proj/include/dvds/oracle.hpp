#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dvds/core.hpp"
#include "dvds/cvar.hpp"
#include "dvds/estimator.hpp"

namespace dvds {

/// Finite-support law of (X, Z, Y): covariate levels with probabilities, a
/// propensity per level and a conditional outcome distribution per
/// (level, arm).
class DiscreteDGP {
 public:
  /// outcome[level][arm]. Throws DomainError on invalid probabilities.
  DiscreteDGP(std::vector<double> level_prob, std::vector<double> propensity,
              std::vector<std::array<DiscreteDist, 2>> outcome);

  std::size_t levels() const noexcept { return level_prob_.size(); }
  double level_prob(std::size_t x) const { return level_prob_[x]; }
  double propensity(std::size_t x) const { return propensity_[x]; }
  const DiscreteDist& outcome(std::size_t x, int arm) const { return outcome_[x][static_cast<std::size_t>(arm)]; }

  /// E[Y], E[Z], E[ZY].
  double mean_outcome() const;
  double mean_treatment() const;
  double mean_treated_outcome() const;

 private:
  std::vector<double> level_prob_;
  std::vector<double> propensity_;
  std::vector<std::array<DiscreteDist, 2>> outcome_;
};

/// Nuisance values per covariate level (and arm). Used both for the exact
/// nuisances of a DiscreteDGP and for injected, possibly wrong, ones.
struct LevelNuisances {
  std::vector<double> e;
  std::array<std::vector<double>, 2> mu, q_plus, q_minus, rho_plus, rho_minus;

  std::size_t levels() const noexcept { return e.size(); }
  NuisanceRow row(std::size_t level) const;
  std::vector<double>& q(Side s, int arm) { return s == Side::Upper ? q_plus[arm] : q_minus[arm]; }
  std::vector<double>& rho(Side s, int arm) { return s == Side::Upper ? rho_plus[arm] : rho_minus[arm]; }
};

/// Exact e, μ, Q± and ρ± = Λ⁻¹μ + (1−Λ⁻¹)CVaR± at every level and arm.
LevelNuisances true_nuisances(const DiscreteDGP& dgp, const SensitivityParams& params);

/// ϱ±(x, z; Q̂) = E[transformed outcome at Q̂ | x, z] for injected quantiles.
/// Fills rho_plus/rho_minus of `nuisances` from its q_plus/q_minus.
void set_exact_rho_for_quantiles(const DiscreteDGP& dgp, const SensitivityParams& params, LevelNuisances& nuisances);

/// Largest/smallest counterfactual regression over reweightings of the arm's
/// outcome pmf with likelihood ratio in [Λ⁻¹, Λ] (greedy on the box, no
/// quantiles involved).
double box_reweighted_mean(const DiscreteDist& dist, const SensitivityParams& params, Side side);

/// Sharp bounds by direct greedy reweighting at every level, aggregated
/// across levels; ATE by interval subtraction, ATT directly on the treated.
Interval sharp_bound_oracle(const DiscreteDGP& dgp, const SensitivityParams& params, Estimand estimand);

/// Sharp bounds from the quantile/CVaR mixture E[ZY + (1−Z)ρ±(X,1)] and its
/// control-arm analogue.
Interval mixture_bounds(const DiscreteDGP& dgp, const SensitivityParams& params, Estimand estimand);

/// Worst-case propensity of receiving `arm` given (level, y): the odds of
/// the arm are scaled by Λ^∓1 off the quantile boundary; the boundary atom
/// takes the multiplier that makes E[1{Z=arm}/e±(X,Y) | X] = 1.
double adversarial_propensity(const DiscreteDGP& dgp, const SensitivityParams& params, std::size_t level, double y,
                              Side side, int arm = 1);

/// Sharp bounds as E[Y·1{Z=arm}/e±(X,Y)].
Interval adversarial_ipw_bounds(const DiscreteDGP& dgp, const SensitivityParams& params, Estimand estimand);

/// Exact expectation of the influence function φ under the DGP, using the
/// supplied nuisances (true ones when null). ATT uses {E[Y] − ψ₀^∓}/E[Z].
double population_dvds(const DiscreteDGP& dgp, const SensitivityParams& params, const LevelNuisances* nuisances,
                       Estimand estimand, Side side);

/// n seeded draws. The single covariate column "level" holds the level index.
Dataset sample_discrete(const DiscreteDGP& dgp, std::size_t n, std::uint64_t seed,
                        OutcomeKind kind = OutcomeKind::Continuous);

/// Row-wise NuisanceSet from level nuisances, using column 0 as the level.
NuisanceSet nuisance_set_from_levels(const LevelNuisances& nuisances, const Dataset& data);

}  // namespace dvds
