#pragma once

#include <span>
#include <vector>

#include "dvds/core.hpp"

namespace dvds {

/// Finite distribution on the real line. Weights are validated (nonnegative,
/// summing to 1 within 1e-12) and then renormalized to sum to 1.
class DiscreteDist {
 public:
  DiscreteDist(std::vector<double> atoms, std::vector<double> weights);

  /// Point mass or Bernoulli helpers.
  static DiscreteDist point(double value);
  static DiscreteDist bernoulli(double p);

  std::size_t size() const noexcept { return atoms_.size(); }
  const std::vector<double>& atoms() const noexcept { return atoms_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  double mean() const noexcept;
  /// Expectation of f(Y).
  template <typename F>
  double expect(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) s += weights_[i] * f(atoms_[i]);
    return s;
  }
  /// Distribution of −Y.
  DiscreteDist negated() const;

 private:
  std::vector<double> atoms_;
  std::vector<double> weights_;
};

/// Left-continuous generalized inverse: the smallest atom q with F(q) ≥ alpha.
/// Throws DomainError unless alpha ∈ (0, 1].
double empirical_quantile(const DiscreteDist& dist, double alpha);

/// Upper tail: Q_τ + (1/(1−τ))·E[{Y − Q_τ}₊]. Lower tail: −cvar(−Y, +).
double cvar(const DiscreteDist& dist, const SensitivityParams& params, Side side);

/// Reweighting problem sup (or inf) ∫y dG over dG/dF ≤ 1/(1−τ), solved by
/// greedy mass allocation over atoms sorted by value. Test oracle for cvar().
double cvar_dual_oracle(const DiscreteDist& dist, const SensitivityParams& params, Side side);

/// Λ⁻¹y + (1−Λ⁻¹)(q + (1/(1−τ)){y − q}±), with {t}₊ = max(t,0), {t}₋ = min(t,0).
double transformed_outcome(double y, double q, const SensitivityParams& params, Side side) noexcept;

/// q + Λ^{±sign(y−q)}(y − q) with sign(0) = +1.
double weighting_kernel(double y, double q, const SensitivityParams& params, Side side) noexcept;

}  // namespace dvds
