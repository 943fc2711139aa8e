#include "dvds/cvar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dvds {

namespace {

constexpr double kWeightTolerance = 1e-12;
// Slack for comparing a running CDF against alpha after floating-point summation.
constexpr double kCdfSlack = 1e-12;

// (atom, weight) pairs sorted ascending with equal atoms merged.
std::vector<std::pair<double, double>> merged_support(const DiscreteDist& dist) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) pts.emplace_back(dist.atoms()[i], dist.weights()[i]);
  std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<double, double>> merged;
  for (const auto& p : pts) {
    if (!merged.empty() && merged.back().first == p.first) {
      merged.back().second += p.second;
    } else {
      merged.push_back(p);
    }
  }
  return merged;
}

}  // namespace

DiscreteDist::DiscreteDist(std::vector<double> atoms, std::vector<double> weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  if (atoms_.empty() || atoms_.size() != weights_.size()) {
    throw DomainError("discrete distribution needs equally many atoms and weights (at least one)");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (!std::isfinite(atoms_[i])) throw DomainError("discrete distribution atoms must be finite");
    if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
      throw DomainError("discrete distribution weights must be nonnegative");
    }
    total += weights_[i];
  }
  if (std::abs(total - 1.0) > kWeightTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "discrete distribution weights sum to " << total << ", expected 1";
    throw DomainError(msg.str());
  }
  for (auto& w : weights_) w /= total;
}

DiscreteDist DiscreteDist::point(double value) { return DiscreteDist({value}, {1.0}); }

DiscreteDist DiscreteDist::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("bernoulli probability must lie in [0,1]");
  return DiscreteDist({0.0, 1.0}, {1.0 - p, p});
}

double DiscreteDist::mean() const noexcept {
  return expect([](double y) { return y; });
}

DiscreteDist DiscreteDist::negated() const {
  std::vector<double> neg(atoms_.size());
  std::transform(atoms_.begin(), atoms_.end(), neg.begin(), [](double y) { return -y; });
  return DiscreteDist(std::move(neg), weights_);
}

double empirical_quantile(const DiscreteDist& dist, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("quantile level must lie in (0,1]");
  const auto support = merged_support(dist);
  double cdf = 0.0;
  for (const auto& [atom, weight] : support) {
    cdf += weight;
    if (weight > 0.0 && cdf >= alpha - kCdfSlack) return atom;
  }
  // Only reachable through rounding when alpha == 1: the largest charged atom.
  for (auto it = support.rbegin(); it != support.rend(); ++it) {
    if (it->second > 0.0) return it->first;
  }
  return support.back().first;
}

double cvar(const DiscreteDist& dist, const SensitivityParams& params, Side side) {
  if (side == Side::Lower) return -cvar(dist.negated(), params, Side::Upper);
  const double q = empirical_quantile(dist, params.tau());
  const double excess = dist.expect([q](double y) { return std::max(y - q, 0.0); });
  return q + params.tail_weight() * excess;
}

double cvar_dual_oracle(const DiscreteDist& dist, const SensitivityParams& params, Side side) {
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& y = dist.atoms();
  // Value ties keep index order.
  if (side == Side::Upper) {
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return y[a] > y[b]; });
  } else {
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return y[a] < y[b]; });
  }
  const double cap = params.tail_weight();
  double remaining = 1.0;
  double value = 0.0;
  for (auto i : order) {
    if (remaining <= 0.0) break;
    const double mass = std::min(dist.weights()[i] * cap, remaining);
    value += mass * y[i];
    remaining -= mass;
  }
  return value;
}

double transformed_outcome(double y, double q, const SensitivityParams& params, Side side) noexcept {
  const double inv = 1.0 / params.lambda();
  const double tail = side == Side::Upper ? std::max(y - q, 0.0) : std::min(y - q, 0.0);
  return inv * y + (1.0 - inv) * (q + params.tail_weight() * tail);
}

double weighting_kernel(double y, double q, const SensitivityParams& params, Side side) noexcept {
  const double d = y - q;
  const bool nonneg = d >= 0.0;
  const bool up = (side == Side::Upper) == nonneg;
  const double factor = up ? params.lambda() : 1.0 / params.lambda();
  if (factor == 1.0) return y;
  return q + factor * d;
}

}  // namespace dvds
