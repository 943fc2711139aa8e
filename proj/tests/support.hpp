#pragma once

// Independent reference computations shared by the test binaries. Nothing
// here calls the library routines it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "dvds/cvar.hpp"
#include "dvds/oracle.hpp"

namespace testsupport {

// Extreme value of sum w_i r_i y_i over r_i in [1/L, L] with sum w_i r_i = 1.
// Linear program on a box with one equality: some optimal vertex has at most
// one coordinate strictly inside its bounds, so enumerate them all.
inline double box_lp(const std::vector<double>& y, const std::vector<double>& w, double lam, bool upper) {
  const std::size_t k = y.size();
  const double lo = 1.0 / lam, hi = lam;
  double best = upper ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  for (std::size_t free = 0; free < k; ++free) {
    if (w[free] <= 0.0) continue;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
      if (mask & (std::uint64_t{1} << free)) continue;
      double mass = 0.0, val = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        if (i == free) continue;
        const double r = (mask >> i) & 1 ? hi : lo;
        mass += w[i] * r;
        val += w[i] * r * y[i];
      }
      const double r = (1.0 - mass) / w[free];
      if (r < lo - 1e-12 || r > hi + 1e-12) continue;
      val += w[free] * r * y[free];
      best = upper ? std::max(best, val) : std::min(best, val);
    }
  }
  return best;
}

// min over q of q + (1+L)·E(Y − q)₊, attained at an atom.
inline double ru_cvar_upper(const std::vector<double>& y, const std::vector<double>& w, double lam) {
  double best = std::numeric_limits<double>::infinity();
  for (double q : y) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * std::max(y[i] - q, 0.0);
    best = std::min(best, q + (1.0 + lam) * s);
  }
  return best;
}

inline double two_pass_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  long double m = 0;
  for (double x : v) m += x;
  m /= n;
  long double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(static_cast<double>(ss / (n * (n - 1))));
}

inline std::vector<double> random_simplex(std::mt19937_64& g, std::size_t k) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> w(k);
  double s = 0.0;
  for (auto& x : w) s += (x = ex(g) + 1e-3);
  for (auto& x : w) x /= s;
  return w;
}

inline dvds::DiscreteDist random_dist(std::mt19937_64& g, std::size_t max_atoms, bool allow_ties = true) {
  std::uniform_int_distribution<std::size_t> na(1, max_atoms);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  const std::size_t k = na(g);
  std::vector<double> atoms(k);
  for (auto& a : atoms) a = allow_ties && (g() % 4 == 0) ? std::round(u(g)) : u(g);
  return dvds::DiscreteDist(atoms, random_simplex(g, k));
}

inline dvds::DiscreteDGP random_dgp(std::mt19937_64& g, std::size_t max_levels = 5, std::size_t max_atoms = 6) {
  std::uniform_int_distribution<std::size_t> nl(1, max_levels);
  std::uniform_real_distribution<double> pe(0.1, 0.9);
  const std::size_t levels = nl(g);
  std::vector<double> e(levels);
  std::vector<std::array<dvds::DiscreteDist, 2>> out;
  for (std::size_t x = 0; x < levels; ++x) {
    e[x] = pe(g);
    out.push_back({random_dist(g, max_atoms), random_dist(g, max_atoms)});
  }
  return dvds::DiscreteDGP(random_simplex(g, levels), e, std::move(out));
}

// Sharp bounds from first principles: per level, the unobserved arm's
// regression is the box LP; observed parts are plain expectations.
struct DirectBounds {
  double m1_lo, m1_hi, m0_lo, m0_hi, ate_lo, ate_hi, att_lo, att_hi;
};

inline DirectBounds direct_bounds(const dvds::DiscreteDGP& dgp, double lam) {
  DirectBounds b{};
  double ez = 0.0, ezy1 = 0.0, ez_r0lo = 0.0, ez_r0hi = 0.0;
  for (std::size_t x = 0; x < dgp.levels(); ++x) {
    const double p = dgp.level_prob(x), e = dgp.propensity(x);
    const auto& d1 = dgp.outcome(x, 1);
    const auto& d0 = dgp.outcome(x, 0);
    double mu1 = 0, mu0 = 0;
    for (std::size_t i = 0; i < d1.size(); ++i) mu1 += d1.weights()[i] * d1.atoms()[i];
    for (std::size_t i = 0; i < d0.size(); ++i) mu0 += d0.weights()[i] * d0.atoms()[i];
    const double r1hi = box_lp(d1.atoms(), d1.weights(), lam, true);
    const double r1lo = box_lp(d1.atoms(), d1.weights(), lam, false);
    const double r0hi = box_lp(d0.atoms(), d0.weights(), lam, true);
    const double r0lo = box_lp(d0.atoms(), d0.weights(), lam, false);
    b.m1_hi += p * (e * mu1 + (1 - e) * r1hi);
    b.m1_lo += p * (e * mu1 + (1 - e) * r1lo);
    b.m0_hi += p * ((1 - e) * mu0 + e * r0hi);
    b.m0_lo += p * ((1 - e) * mu0 + e * r0lo);
    ez += p * e;
    ezy1 += p * e * mu1;
    ez_r0lo += p * e * r0lo;
    ez_r0hi += p * e * r0hi;
  }
  b.ate_hi = b.m1_hi - b.m0_lo;
  b.ate_lo = b.m1_lo - b.m0_hi;
  b.att_hi = (ezy1 - ez_r0lo) / ez;
  b.att_lo = (ezy1 - ez_r0hi) / ez;
  return b;
}

// The single-level fixture: e = 1/2, Y(1) ∈ {0 w.p. 0.9, 10 w.p. 0.1}, Y(0) ≡ 0.
inline dvds::DiscreteDGP single_level_fixture() {
  return dvds::DiscreteDGP({1.0}, {0.5}, {{dvds::DiscreteDist::point(0.0), dvds::DiscreteDist({0.0, 10.0}, {0.9, 0.1})}});
}

// Three covariate levels with distinct propensities and outcome laws.
inline dvds::DiscreteDGP three_level_fixture() {
  using dvds::DiscreteDist;
  return dvds::DiscreteDGP({0.3, 0.5, 0.2}, {0.3, 0.5, 0.7},
                           {{DiscreteDist({-1.0, 0.0, 2.0}, {0.2, 0.5, 0.3}), DiscreteDist({0.0, 1.0, 4.0}, {0.4, 0.4, 0.2})},
                            {DiscreteDist({0.0, 1.0}, {0.5, 0.5}), DiscreteDist({-2.0, 1.0, 3.0}, {0.25, 0.5, 0.25})},
                            {DiscreteDist({1.0, 5.0}, {0.8, 0.2}), DiscreteDist({0.0, 2.0, 6.0}, {0.3, 0.3, 0.4})}});
}

}  // namespace testsupport
