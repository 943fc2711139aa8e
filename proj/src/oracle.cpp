#include "dvds/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dvds/numeric.hpp"

namespace dvds {

DiscreteDGP::DiscreteDGP(std::vector<double> level_prob, std::vector<double> propensity,
                         std::vector<std::array<DiscreteDist, 2>> outcome)
    : level_prob_(std::move(level_prob)), propensity_(std::move(propensity)), outcome_(std::move(outcome)) {
  if (level_prob_.empty() || propensity_.size() != level_prob_.size() || outcome_.size() != level_prob_.size()) {
    throw DomainError("discrete DGP needs one probability, propensity and outcome pair per level");
  }
  double total = 0.0;
  for (double p : level_prob_) {
    if (!(p >= 0.0)) throw DomainError("level probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("level probabilities must sum to 1");
  for (double e : propensity_) {
    if (!(e > 0.0 && e < 1.0)) throw DomainError("level propensities must lie in (0,1)");
  }
}

double DiscreteDGP::mean_outcome() const {
  double s = 0.0;
  for (std::size_t x = 0; x < levels(); ++x) {
    s += level_prob_[x] * (propensity_[x] * outcome(x, 1).mean() + (1.0 - propensity_[x]) * outcome(x, 0).mean());
  }
  return s;
}

double DiscreteDGP::mean_treatment() const {
  double s = 0.0;
  for (std::size_t x = 0; x < levels(); ++x) s += level_prob_[x] * propensity_[x];
  return s;
}

double DiscreteDGP::mean_treated_outcome() const {
  double s = 0.0;
  for (std::size_t x = 0; x < levels(); ++x) s += level_prob_[x] * propensity_[x] * outcome(x, 1).mean();
  return s;
}

NuisanceRow LevelNuisances::row(std::size_t level) const {
  NuisanceRow r{};
  r.e_hat = e[level];
  for (std::size_t a = 0; a < 2; ++a) {
    r.q_plus[a] = q_plus[a][level];
    r.q_minus[a] = q_minus[a][level];
    r.rho_plus[a] = rho_plus[a][level];
    r.rho_minus[a] = rho_minus[a][level];
  }
  return r;
}

namespace {

LevelNuisances sized_nuisances(std::size_t levels) {
  LevelNuisances nu;
  nu.e.assign(levels, 0.0);
  for (std::size_t a = 0; a < 2; ++a) {
    for (auto* v : {&nu.mu[a], &nu.q_plus[a], &nu.q_minus[a], &nu.rho_plus[a], &nu.rho_minus[a]}) {
      v->assign(levels, 0.0);
    }
  }
  return nu;
}

// Probability of the observed arm given the level.
double arm_prob(const DiscreteDGP& dgp, std::size_t x, int arm) {
  return arm == 1 ? dgp.propensity(x) : 1.0 - dgp.propensity(x);
}

// Bound on E_full[Y(arm)] = Σ_x p_x [P(arm|x) μ(x,arm) + P(other|x) r(x)],
// with r the adversarial counterfactual regression supplied per level.
template <typename Regression>
double aggregate_arm(const DiscreteDGP& dgp, int arm, Regression&& counterfactual) {
  double s = 0.0;
  for (std::size_t x = 0; x < dgp.levels(); ++x) {
    const double pa = arm_prob(dgp, x, arm);
    s += dgp.level_prob(x) * (pa * dgp.outcome(x, arm).mean() + (1.0 - pa) * counterfactual(x));
  }
  return s;
}

// Combine per-arm bounds: arm_bound(arm, side).
template <typename ArmBound>
Interval combine(const DiscreteDGP& dgp, Estimand estimand, ArmBound&& arm_bound) {
  switch (estimand) {
    case Estimand::Mean1: return {arm_bound(1, Side::Lower), arm_bound(1, Side::Upper)};
    case Estimand::Mean0: return {arm_bound(0, Side::Lower), arm_bound(0, Side::Upper)};
    case Estimand::ATE:
      return {arm_bound(1, Side::Lower) - arm_bound(0, Side::Upper),
              arm_bound(1, Side::Upper) - arm_bound(0, Side::Lower)};
    case Estimand::ATT: {
      const double ey = dgp.mean_outcome();
      const double ez = dgp.mean_treatment();
      return {(ey - arm_bound(0, Side::Upper)) / ez, (ey - arm_bound(0, Side::Lower)) / ez};
    }
  }
  return {};
}

}  // namespace

LevelNuisances true_nuisances(const DiscreteDGP& dgp, const SensitivityParams& params) {
  auto nu = sized_nuisances(dgp.levels());
  const double inv = 1.0 / params.lambda();
  for (std::size_t x = 0; x < dgp.levels(); ++x) {
    nu.e[x] = dgp.propensity(x);
    for (int arm = 0; arm < 2; ++arm) {
      const auto a = static_cast<std::size_t>(arm);
      const auto& dist = dgp.outcome(x, arm);
      const double mu = dist.mean();
      nu.mu[a][x] = mu;
      nu.q_plus[a][x] = empirical_quantile(dist, params.tau());
      nu.q_minus[a][x] = empirical_quantile(dist, 1.0 - params.tau());
      nu.rho_plus[a][x] = inv * mu + (1.0 - inv) * cvar(dist, params, Side::Upper);
      nu.rho_minus[a][x] = inv * mu + (1.0 - inv) * cvar(dist, params, Side::Lower);
    }
  }
  return nu;
}

void set_exact_rho_for_quantiles(const DiscreteDGP& dgp, const SensitivityParams& params, LevelNuisances& nu) {
  for (std::size_t x = 0; x < dgp.levels(); ++x) {
    for (int arm = 0; arm < 2; ++arm) {
      const auto& dist = dgp.outcome(x, arm);
      for (Side side : {Side::Upper, Side::Lower}) {
        const double q = nu.q(side, arm)[x];
        nu.rho(side, arm)[x] = dist.expect([&](double y) { return transformed_outcome(y, q, params, side); });
      }
    }
  }
}

double box_reweighted_mean(const DiscreteDist& dist, const SensitivityParams& params, Side side) {
  const double lam = params.lambda();
  const auto& y = dist.atoms();
  const auto& w = dist.weights();
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return side == Side::Upper ? y[a] > y[b] : y[a] < y[b]; });
  // Every atom starts at the minimal ratio Λ⁻¹; the leftover mass goes to
  // the most favourable atoms, each raised at most to ratio Λ.
  double value = 0.0;
  for (std::size_t j = 0; j < dist.size(); ++j) value += w[j] / lam * y[j];
  double budget = 1.0 - 1.0 / lam;
  for (auto j : order) {
    if (budget <= 0.0) break;
    const double extra = std::min((lam - 1.0 / lam) * w[j], budget);
    value += extra * y[j];
    budget -= extra;
  }
  return value;
}

Interval sharp_bound_oracle(const DiscreteDGP& dgp, const SensitivityParams& params, Estimand estimand) {
  auto arm_bound = [&](int arm, Side side) {
    return aggregate_arm(dgp, arm, [&](std::size_t x) { return box_reweighted_mean(dgp.outcome(x, arm), params, side); });
  };
  if (estimand != Estimand::ATT) return combine(dgp, estimand, arm_bound);
  // E[Y(0) | Z=1]·E[Z] bounded by reweighting the control pmf on the treated.
  double treated_cf_upper = 0.0, treated_cf_lower = 0.0;
  for (std::size_t x = 0; x < dgp.levels(); ++x) {
    const double w = dgp.level_prob(x) * dgp.propensity(x);
    treated_cf_upper += w * box_reweighted_mean(dgp.outcome(x, 0), params, Side::Upper);
    treated_cf_lower += w * box_reweighted_mean(dgp.outcome(x, 0), params, Side::Lower);
  }
  const double ez = dgp.mean_treatment();
  const double ezy = dgp.mean_treated_outcome();
  return {(ezy - treated_cf_upper) / ez, (ezy - treated_cf_lower) / ez};
}

Interval mixture_bounds(const DiscreteDGP& dgp, const SensitivityParams& params, Estimand estimand) {
  const auto nu = true_nuisances(dgp, params);
  auto arm_bound = [&](int arm, Side side) {
    const auto a = static_cast<std::size_t>(arm);
    const auto& rho = side == Side::Upper ? nu.rho_plus[a] : nu.rho_minus[a];
    return aggregate_arm(dgp, arm, [&](std::size_t x) { return rho[x]; });
  };
  return combine(dgp, estimand, arm_bound);
}

double adversarial_propensity(const DiscreteDGP& dgp, const SensitivityParams& params, std::size_t level, double y,
                              Side side, int arm) {
  if (level >= dgp.levels()) throw DomainError("covariate level out of range");
  if (arm != 0 && arm != 1) throw DomainError("treatment arm must be 0 or 1");
  const auto& dist = dgp.outcome(level, arm);
  const double lam = params.lambda();
  const double q = empirical_quantile(dist, side == Side::Upper ? params.tau() : 1.0 - params.tau());
  // Odds multiplier m(y); 1/m(y) is the counterfactual likelihood ratio.
  auto off_boundary = [&](double v) {
    const bool above = v > q;
    return (side == Side::Upper) == above ? 1.0 / lam : lam;
  };
  double multiplier;
  if (y != q) {
    multiplier = off_boundary(y);
  } else {
    double mass_at_q = 0.0;
    double ratio_mass = 0.0;
    for (std::size_t j = 0; j < dist.size(); ++j) {
      const double v = dist.atoms()[j];
      if (v == q) {
        mass_at_q += dist.weights()[j];
      } else {
        ratio_mass += dist.weights()[j] / off_boundary(v);
      }
    }
    if (mass_at_q <= 0.0) throw Error("adversarial propensity: quantile atom carries no mass");
    double ratio = (1.0 - ratio_mass) / mass_at_q;
    constexpr double kSlack = 1e-9;
    if (ratio < 1.0 / lam - kSlack || ratio > lam + kSlack) {
      throw Error("adversarial propensity: no feasible boundary multiplier");
    }
    ratio = std::clamp(ratio, 1.0 / lam, lam);
    multiplier = 1.0 / ratio;
  }
  const double base = arm_prob(dgp, level, arm);
  const double odds = base / (1.0 - base) * multiplier;
  return odds / (1.0 + odds);
}

Interval adversarial_ipw_bounds(const DiscreteDGP& dgp, const SensitivityParams& params, Estimand estimand) {
  auto arm_bound = [&](int arm, Side side) {
    double s = 0.0;
    for (std::size_t x = 0; x < dgp.levels(); ++x) {
      const auto& dist = dgp.outcome(x, arm);
      const double pa = arm_prob(dgp, x, arm);
      const double inner = dist.expect([&](double y) { return y / adversarial_propensity(dgp, params, x, y, side, arm); });
      s += dgp.level_prob(x) * pa * inner;
    }
    return s;
  };
  return combine(dgp, estimand, arm_bound);
}

double population_dvds(const DiscreteDGP& dgp, const SensitivityParams& params, const LevelNuisances* nuisances,
                       Estimand estimand, Side side) {
  if (estimand == Estimand::ATT) {
    const double psi0 = population_dvds(dgp, params, nuisances, Estimand::Mean0, opposite(side));
    return (dgp.mean_outcome() - psi0) / dgp.mean_treatment();
  }
  LevelNuisances truth;
  if (nuisances == nullptr) {
    truth = true_nuisances(dgp, params);
    nuisances = &truth;
  }
  if (nuisances->levels() != dgp.levels()) throw DomainError("injected nuisances must cover every level");
  double total = 0.0;
  for (std::size_t x = 0; x < dgp.levels(); ++x) {
    const auto row = nuisances->row(x);
    if (!(row.e_hat > 0.0 && row.e_hat < 1.0)) throw DomainError("injected propensity must lie in (0,1)");
    double level_sum = 0.0;
    for (int arm = 0; arm < 2; ++arm) {
      const double pa = arm_prob(dgp, x, arm);
      level_sum += pa * dgp.outcome(x, arm).expect([&](double y) { return influence(y, arm, row, params, estimand, side); });
    }
    total += dgp.level_prob(x) * level_sum;
  }
  return total;
}

Dataset sample_discrete(const DiscreteDGP& dgp, std::size_t n, std::uint64_t seed, OutcomeKind kind) {
  if (n == 0) throw DomainError("sample size must be >= 1");
  Rng rng(seed);
  auto draw = [&rng](const std::vector<double>& weights) {
    const double u = rng.uniform();
    double cdf = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      cdf += weights[j];
      if (u < cdf) return j;
    }
    // Rounding left u above the last cumulative sum: take the last charged index.
    std::size_t j = weights.size() - 1;
    while (j > 0 && weights[j] == 0.0) --j;
    return j;
  };
  std::vector<double> level_weights(dgp.levels());
  for (std::size_t x = 0; x < dgp.levels(); ++x) level_weights[x] = dgp.level_prob(x);

  RowMatrix cov(static_cast<Eigen::Index>(n), 1);
  std::vector<std::uint8_t> z(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t x = draw(level_weights);
    const int arm = rng.uniform() < dgp.propensity(x) ? 1 : 0;
    const auto& dist = dgp.outcome(x, arm);
    cov(static_cast<Eigen::Index>(i), 0) = static_cast<double>(x);
    z[i] = static_cast<std::uint8_t>(arm);
    y[i] = dist.atoms()[draw(dist.weights())];
  }
  return Dataset(std::move(cov), std::move(z), std::move(y), kind, {"level"});
}

NuisanceSet nuisance_set_from_levels(const LevelNuisances& nu, const Dataset& data) {
  NuisanceSet set(data.rows());
  const bool with_mu = nu.mu[0].size() == nu.levels() && nu.mu[1].size() == nu.levels();
  if (with_mu) {
    for (auto& a : set.arm) a.mu.assign(data.rows(), 0.0);
  }
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const double raw = data.x(i)[0];
    const auto level = static_cast<std::size_t>(raw);
    if (raw < 0.0 || static_cast<double>(level) != raw || level >= nu.levels()) {
      throw DataError("row " + std::to_string(i + 1) + ": covariate is not a valid level index");
    }
    set.e_hat[i] = nu.e[level];
    for (std::size_t a = 0; a < 2; ++a) {
      set.arm[a].q_plus[i] = nu.q_plus[a][level];
      set.arm[a].q_minus[i] = nu.q_minus[a][level];
      set.arm[a].rho_plus[i] = nu.rho_plus[a][level];
      set.arm[a].rho_minus[i] = nu.rho_minus[a][level];
      if (with_mu) set.arm[a].mu[i] = nu.mu[a][level];
    }
  }
  return set;
}

}  // namespace dvds
