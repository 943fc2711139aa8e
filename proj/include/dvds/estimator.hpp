#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dvds/core.hpp"
#include "dvds/nuisance.hpp"

namespace dvds {

/// Assignment of rows to K folds of sizes ⌊n/K⌋ or ⌈n/K⌉.
struct FoldPlan {
  std::vector<std::size_t> assignment;  // fold index per row
  std::size_t folds = 0;
  std::uint64_t seed = 0;

  std::size_t rows() const noexcept { return assignment.size(); }
  std::vector<std::size_t> members(std::size_t fold) const;
  std::vector<std::size_t> complement(std::size_t fold) const;
};

/// Seeded uniform permutation chunked into K blocks; the first n mod K
/// blocks get the extra row. Throws DomainError unless 2 ≤ K ≤ n.
FoldPlan split_folds(std::size_t n, std::size_t folds, std::uint64_t seed);

/// Learners for every nuisance problem.
struct LearnerBundle {
  LearnerSpec propensity = LearnerSpec::logistic();
  LearnerSpec quantile = LearnerSpec::pinball();
  /// Continuous outcomes: μ̂ and transformed-outcome regressions.
  LearnerSpec regression = LearnerSpec::ridge();
  /// Binary outcomes: μ̂, from which Q̂± and ρ̂± follow in closed form.
  LearnerSpec binary_outcome = LearnerSpec::logistic();
  RhoStrategy strategy = RhoStrategy::Separate;
};

/// Cross-fitted nuisances: for each fold, learners are trained on the other
/// folds and evaluated on the fold's rows at both arms. Propensities are
/// clipped to [ε, 1−ε]. Fit failures abort the call with the fold index in
/// the message. Folds are processed on up to `threads` workers; the result
/// does not depend on the thread count.
NuisanceSet crossfit_nuisances(const Dataset& data, const SensitivityParams& params, const LearnerBundle& learners,
                               const FoldPlan& plan, double epsilon, unsigned threads = 1);

/// Same as crossfit_nuisances for several Λ at once. Λ-free fits (ê, μ̂) are
/// shared across the grid; the result is identical to separate calls.
std::vector<NuisanceSet> crossfit_nuisances_grid(const Dataset& data, std::span<const SensitivityParams> grid,
                                                 const LearnerBundle& learners, const FoldPlan& plan, double epsilon,
                                                 unsigned threads = 1);

/// Recentered influence value φ for one observation. ATE combines
/// φ₁^± − φ₀^∓. Estimand::ATT is not a per-row influence and is rejected.
double influence(double y, int z, const NuisanceRow& eta, const SensitivityParams& params, Estimand estimand,
                 Side side);

/// Point bounds, standard errors and the per-row values they were computed
/// from.
///
/// For Mean1/Mean0/ATE the influence vectors hold φ values and
/// psi == mean(influence). For ATT they hold the residuals
/// Yᵢ − φ₀^∓ᵢ − Zᵢψ̂_ATT^±, whose mean is zero.
struct BoundEstimate {
  Estimand estimand = Estimand::ATE;
  double lambda = 1.0;
  std::size_t n = 0;
  double psi_lower = 0.0, psi_upper = 0.0;
  double se_lower = 0.0, se_upper = 0.0;
  std::vector<double> influence_lower, influence_upper;
};

/// Algorithm-1 aggregation plus the 1/(n(n−1)) standard errors.
/// Estimand::ATT is forwarded to att_bounds. Throws DomainError when n < 2.
BoundEstimate estimate_bounds(const Dataset& data, const NuisanceSet& eta, const SensitivityParams& params,
                              Estimand estimand);

/// ATT bounds {Ȳ − ψ̂₀^∓}/Z̄ and their delta-method standard errors.
/// Throws DegenerateFitError with fewer than two treated rows.
BoundEstimate att_bounds(const Dataset& data, const NuisanceSet& eta, const SensitivityParams& params);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double width() const noexcept { return upper - lower; }
};

/// (ψ̂⁻ − z_{1−α}σ̂₋, ψ̂⁺ + z_{1−α}σ̂₊). For a two-sided level 1−α region
/// pass α/2.
Interval wald_bounds(const BoundEstimate& est, double alpha);

/// Standard AIPW estimate of the ATE.
double aipw(const Dataset& data, std::span<const double> e_hat, std::span<const double> mu1,
            std::span<const double> mu0);

struct ManskiBounds {
  Interval mean1, mean0, ate;
};

/// No-assumption bounds for a binary outcome. Throws DomainError otherwise.
ManskiBounds manski_bounds_binary(const Dataset& data);

}  // namespace dvds
