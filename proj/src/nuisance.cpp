#include "dvds/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dvds/cvar.hpp"
#include "dvds/numeric.hpp"

namespace dvds {

std::string_view to_string(LearnerKind k) noexcept {
  switch (k) {
    case LearnerKind::Logistic: return "logistic";
    case LearnerKind::Ridge: return "ridge";
    case LearnerKind::PinballLinear: return "pinball_linear";
    case LearnerKind::Constant: return "constant";
    case LearnerKind::OracleInjection: return "oracle_injection";
  }
  return "unknown";
}

std::string_view to_string(FeatureExpansion f) noexcept {
  return f == FeatureExpansion::Raw ? "raw" : "raw_plus_pairwise_interactions";
}

std::string_view to_string(RhoStrategy s) noexcept { return s == RhoStrategy::Direct ? "direct" : "separate"; }

LearnerKind parse_learner_kind(std::string_view name) {
  for (auto k : {LearnerKind::Logistic, LearnerKind::Ridge, LearnerKind::PinballLinear, LearnerKind::Constant,
                 LearnerKind::OracleInjection}) {
    if (name == to_string(k)) return k;
  }
  throw DomainError("unknown learner kind '" + std::string(name) + "'");
}

FeatureExpansion parse_feature_expansion(std::string_view name) {
  if (name == "raw") return FeatureExpansion::Raw;
  if (name == "raw_plus_pairwise_interactions" || name == "pairwise") return FeatureExpansion::RawPlusPairwise;
  throw DomainError("unknown feature expansion '" + std::string(name) + "'");
}

RhoStrategy parse_rho_strategy(std::string_view name) {
  if (name == "direct") return RhoStrategy::Direct;
  if (name == "separate") return RhoStrategy::Separate;
  throw DomainError("unknown rho strategy '" + std::string(name) + "'");
}

void LearnerSpec::validate() const {
  if (!(regularization >= 0.0) || !std::isfinite(regularization)) throw DomainError("learner regularization must be >= 0");
  if (max_iterations < 1) throw DomainError("learner max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw DomainError("learner tolerance must be > 0");
  if (kind == LearnerKind::OracleInjection && !injected) {
    throw DomainError("oracle_injection learner needs an injected function");
  }
}

LearnerSpec LearnerSpec::logistic(double regularization) {
  LearnerSpec s;
  s.kind = LearnerKind::Logistic;
  s.regularization = regularization;
  return s;
}

LearnerSpec LearnerSpec::ridge(double regularization) {
  LearnerSpec s;
  s.kind = LearnerKind::Ridge;
  s.regularization = regularization;
  return s;
}

LearnerSpec LearnerSpec::pinball(double regularization, int max_iterations) {
  LearnerSpec s;
  s.kind = LearnerKind::PinballLinear;
  s.regularization = regularization;
  s.max_iterations = max_iterations;
  s.tolerance = 1e-7;
  return s;
}

LearnerSpec LearnerSpec::constant() { return LearnerSpec{}; }

LearnerSpec LearnerSpec::injection(InjectedFunction fn) {
  LearnerSpec s;
  s.kind = LearnerKind::OracleInjection;
  s.injected = std::make_shared<const InjectedFunction>(std::move(fn));
  return s;
}

std::size_t expanded_dimension(std::size_t d, FeatureExpansion expansion) noexcept {
  return expansion == FeatureExpansion::Raw ? d : d + d * (d - 1) / 2;
}

void expand_features(std::span<const double> x, FeatureExpansion expansion, std::span<double> out) noexcept {
  std::size_t k = 0;
  for (double v : x) out[k++] = v;
  if (expansion == FeatureExpansion::RawPlusPairwise) {
    // Products x_i x_j for i < j.
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = i + 1; j < x.size(); ++j) out[k++] = x[i] * x[j];
    }
  }
}

double clip_propensity(double value, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw DomainError("propensity clip epsilon must lie in (0, 0.5)");
  return std::min(std::max(value, epsilon), 1.0 - epsilon);
}

namespace {

// Standardized linear predictor: beta[0] + Σ beta[j+1] (φ_j(x) − center_j) / scale_j.
struct LinearModel {
  FeatureExpansion expansion;
  std::size_t raw_dim;
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
  Eigen::VectorXd beta;

  double linear(std::span<const double> x) const {
    const auto p = static_cast<std::size_t>(center.size());
    double buffer[64];
    std::vector<double> heap;
    double* phi = buffer;
    if (p > 64) {
      heap.resize(p);
      phi = heap.data();
    }
    expand_features(x.first(raw_dim), expansion, {phi, p});
    double eta = beta[0];
    for (std::size_t j = 0; j < p; ++j) eta += beta[static_cast<Eigen::Index>(j + 1)] * (phi[j] - center[j]) / scale[j];
    return eta;
  }
};

struct Design {
  Eigen::MatrixXd x;  // rows × (p + 1), first column is the intercept
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
};

Design build_design(const Dataset& data, std::span<const std::size_t> rows, FeatureExpansion expansion) {
  const std::size_t p = expanded_dimension(data.dims(), expansion);
  const auto m = static_cast<Eigen::Index>(rows.size());
  Design d;
  Eigen::MatrixXd raw(m, static_cast<Eigen::Index>(p));
  std::vector<double> phi(p);
  for (Eigen::Index r = 0; r < m; ++r) {
    expand_features(data.x(rows[static_cast<std::size_t>(r)]), expansion, phi);
    for (std::size_t j = 0; j < p; ++j) raw(r, static_cast<Eigen::Index>(j)) = phi[j];
  }
  d.center = raw.colwise().mean().transpose();
  d.scale.resize(static_cast<Eigen::Index>(p));
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
    const double var = (raw.col(j).array() - d.center[j]).square().mean();
    d.scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  d.x.resize(m, static_cast<Eigen::Index>(p) + 1);
  d.x.col(0).setOnes();
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
    d.x.col(j + 1) = (raw.col(j).array() - d.center[j]) / d.scale[j];
  }
  return d;
}

std::shared_ptr<const LinearModel> make_model(const Dataset& data, FeatureExpansion expansion, Design&& design,
                                              Eigen::VectorXd beta) {
  auto model = std::make_shared<LinearModel>();
  model->expansion = expansion;
  model->raw_dim = data.dims();
  model->center = std::move(design.center);
  model->scale = std::move(design.scale);
  model->beta = std::move(beta);
  return model;
}

Eigen::VectorXd penalty_mask(Eigen::Index size) {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(size);
  mask[0] = 0.0;
  return mask;
}

double sigmoid(double eta) noexcept {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double softplus(double eta) noexcept { return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))); }

// Penalized logistic regression by damped Newton with Armijo backtracking.
Eigen::VectorXd fit_logistic_coefficients(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, const LearnerSpec& spec,
                                          const char* what) {
  const double m = static_cast<double>(x.rows());
  const double lambda = spec.regularization;
  const Eigen::VectorXd mask = penalty_mask(x.cols());
  auto objective = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) loss += softplus(eta[i]) - t[i] * eta[i];
    return loss / m + 0.5 * lambda * beta.cwiseProduct(mask).squaredNorm();
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  const double rate = t.mean();
  beta[0] = std::log(rate / (1.0 - rate));
  double current = objective(beta);

  for (int iter = 0; iter < spec.max_iterations; ++iter) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd resid(eta.size());
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double p = sigmoid(eta[i]);
      resid[i] = p - t[i];
      w[i] = std::max(p * (1.0 - p), 1e-12);
    }
    const Eigen::VectorXd grad = x.transpose() * resid / m + lambda * beta.cwiseProduct(mask);
    Eigen::MatrixXd hess = x.transpose() * w.asDiagonal() * x / m;
    hess.diagonal() += lambda * mask + Eigen::VectorXd::Constant(x.cols(), 1e-12);
    const Eigen::VectorXd delta = hess.ldlt().solve(grad);
    const double slope = grad.dot(delta);

    double step = 1.0;
    Eigen::VectorXd candidate = beta - delta;
    double next = objective(candidate);
    while (next > current - 1e-4 * step * slope && step > 1e-10) {
      step *= 0.5;
      candidate = beta - step * delta;
      next = objective(candidate);
    }
    const double moved = (step * delta).cwiseAbs().maxCoeff();
    if (next <= current) {
      beta = std::move(candidate);
      current = next;
    }
    if (moved < spec.tolerance || slope < spec.tolerance * spec.tolerance) return beta;
  }
  throw ConvergenceError(std::string(what) + ": logistic Newton iterations did not converge within " +
                             std::to_string(spec.max_iterations) + " iterations",
                         std::vector<double>(beta.data(), beta.data() + beta.size()));
}

Eigen::VectorXd fit_ridge_coefficients(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, double lambda) {
  const double m = static_cast<double>(x.rows());
  Eigen::MatrixXd gram = x.transpose() * x / m;
  gram.diagonal() += lambda * penalty_mask(x.cols()) + Eigen::VectorXd::Constant(x.cols(), 1e-12);
  return gram.ldlt().solve(x.transpose() * t / m);
}

double empirical_quantile_of(std::vector<double> values, double alpha) {
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  // Smallest order statistic with k/n ≥ α.
  auto k = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-12));
  k = std::clamp<std::size_t>(k, 1, n);
  return values[k - 1];
}

double pinball_loss(double r, double alpha) noexcept { return r > 0.0 ? alpha * r : (alpha - 1.0) * r; }

// Linear check-loss minimization by subgradient descent with
// steps scale/√(k+1). Returns the best iterate seen. A zero residual uses the
// α−1 (left-limit) subgradient.
Eigen::VectorXd fit_pinball_coefficients(const Eigen::MatrixXd& x, const Eigen::VectorXd& t, double alpha,
                                         const LearnerSpec& spec) {
  const double m = static_cast<double>(x.rows());
  const Eigen::VectorXd mask = penalty_mask(x.cols());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  beta[0] = empirical_quantile_of(std::vector<double>(t.data(), t.data() + t.size()), alpha);
  const double spread = std::sqrt((t.array() - t.mean()).square().mean());
  if (spread == 0.0) return beta;

  const int patience = std::max(100, spec.max_iterations / 10);
  Eigen::VectorXd best = beta;
  double best_obj = std::numeric_limits<double>::infinity();
  int best_iter = 0;
  Eigen::VectorXd psi(x.rows());
  for (int k = 0; k < spec.max_iterations; ++k) {
    const Eigen::VectorXd resid = t - x * beta;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < resid.size(); ++i) {
      loss += pinball_loss(resid[i], alpha);
      psi[i] = resid[i] > 0.0 ? alpha : alpha - 1.0;
    }
    const double obj = loss / m + 0.5 * spec.regularization * beta.cwiseProduct(mask).squaredNorm();
    if (obj < best_obj - spec.tolerance * (std::abs(best_obj) + 1e-12) || k == 0) {
      best_iter = k;
    }
    if (obj < best_obj) {
      best_obj = obj;
      best = beta;
    }
    if (k - best_iter > patience) break;
    const Eigen::VectorXd grad = -(x.transpose() * psi) / m + spec.regularization * beta.cwiseProduct(mask);
    beta -= (spread / std::sqrt(static_cast<double>(k) + 1.0)) * grad;
  }
  return best;
}

std::vector<std::size_t> arm_rows(const Dataset& data, std::span<const std::size_t> rows, int arm) {
  std::vector<std::size_t> out;
  for (auto i : rows) {
    if (data.z(i) == arm) out.push_back(i);
  }
  return out;
}

FittedPredictor constant_predictor(double value, LearnerKind kind, std::size_t rows) {
  return FittedPredictor([value](std::span<const double>) { return value; }, kind, rows);
}

FittedPredictor injected_predictor(const LearnerSpec& spec, InjectionQuery query, std::size_t rows) {
  auto fn = spec.injected;
  return FittedPredictor([fn, query](std::span<const double> x) { return (*fn)(x, query); },
                         LearnerKind::OracleInjection, rows);
}

void require_arm(int arm) {
  if (arm != 0 && arm != 1) throw DomainError("treatment arm must be 0 or 1");
}

}  // namespace

FittedPredictor fit_propensity(const Dataset& data, std::span<const std::size_t> rows, const LearnerSpec& spec) {
  spec.validate();
  if (rows.empty()) throw DegenerateFitError("propensity fit: no training rows");
  std::size_t treated = 0;
  for (auto i : rows) treated += static_cast<std::size_t>(data.z(i));
  if (treated == 0 || treated == rows.size()) {
    throw DegenerateFitError("propensity fit: training rows are all " + std::string(treated == 0 ? "control" : "treated"));
  }
  switch (spec.kind) {
    case LearnerKind::Constant:
      return constant_predictor(static_cast<double>(treated) / static_cast<double>(rows.size()), spec.kind, rows.size());
    case LearnerKind::OracleInjection:
      return injected_predictor(spec, InjectionQuery{}, rows.size());
    case LearnerKind::Logistic: {
      Design design = build_design(data, rows, spec.features);
      Eigen::VectorXd t(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t k = 0; k < rows.size(); ++k) t[static_cast<Eigen::Index>(k)] = data.z(rows[k]);
      Eigen::VectorXd beta = fit_logistic_coefficients(design.x, t, spec, "propensity fit");
      auto model = make_model(data, spec.features, std::move(design), std::move(beta));
      return FittedPredictor([model](std::span<const double> x) { return sigmoid(model->linear(x)); },
                             spec.kind, rows.size());
    }
    default:
      throw DomainError("propensity learner must be logistic, constant or oracle_injection, got " +
                        std::string(to_string(spec.kind)));
  }
}

FittedPredictor fit_quantile(const Dataset& data, std::span<const std::size_t> rows, int arm, double alpha,
                             const LearnerSpec& spec) {
  spec.validate();
  require_arm(arm);
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("quantile level alpha must lie in (0,1)");
  const auto sub = arm_rows(data, rows, arm);
  if (sub.empty()) throw DegenerateFitError("quantile fit: no training rows in arm " + std::to_string(arm));
  switch (spec.kind) {
    case LearnerKind::Constant: {
      std::vector<double> ys;
      ys.reserve(sub.size());
      for (auto i : sub) ys.push_back(data.y(i));
      return constant_predictor(empirical_quantile_of(std::move(ys), alpha), spec.kind, sub.size());
    }
    case LearnerKind::OracleInjection: {
      InjectionQuery q;
      q.arm = arm;
      q.alpha = alpha;
      q.side = alpha >= 0.5 ? Side::Upper : Side::Lower;
      return injected_predictor(spec, q, sub.size());
    }
    case LearnerKind::PinballLinear: {
      Design design = build_design(data, sub, spec.features);
      Eigen::VectorXd t(static_cast<Eigen::Index>(sub.size()));
      for (std::size_t k = 0; k < sub.size(); ++k) t[static_cast<Eigen::Index>(k)] = data.y(sub[k]);
      Eigen::VectorXd beta = fit_pinball_coefficients(design.x, t, alpha, spec);
      auto model = make_model(data, spec.features, std::move(design), std::move(beta));
      return FittedPredictor([model](std::span<const double> x) { return model->linear(x); }, spec.kind, sub.size());
    }
    default:
      throw DomainError("quantile learner must be pinball_linear, constant or oracle_injection, got " +
                        std::string(to_string(spec.kind)));
  }
}

FittedPredictor fit_regression(const Dataset& data, std::span<const std::size_t> rows,
                               std::span<const double> targets, const LearnerSpec& spec, const InjectionQuery& query) {
  spec.validate();
  if (rows.empty()) throw DegenerateFitError("regression fit: no training rows");
  if (targets.size() != rows.size()) throw DomainError("regression fit: one target per row required");
  switch (spec.kind) {
    case LearnerKind::Constant:
      return constant_predictor(mean(targets), spec.kind, rows.size());
    case LearnerKind::OracleInjection:
      return injected_predictor(spec, query, rows.size());
    case LearnerKind::Ridge:
    case LearnerKind::Logistic: {
      Eigen::VectorXd t(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t k = 0; k < rows.size(); ++k) t[static_cast<Eigen::Index>(k)] = targets[k];
      Design design = build_design(data, rows, spec.features);
      if (spec.kind == LearnerKind::Ridge) {
        Eigen::VectorXd beta = fit_ridge_coefficients(design.x, t, spec.regularization);
        auto model = make_model(data, spec.features, std::move(design), std::move(beta));
        return FittedPredictor([model](std::span<const double> x) { return model->linear(x); }, spec.kind, rows.size());
      }
      for (double v : targets) {
        if (v != 0.0 && v != 1.0) throw DomainError("logistic regression requires 0/1 targets");
      }
      const double rate = t.mean();
      if (rate == 0.0 || rate == 1.0) {
        throw DegenerateFitError("logistic outcome fit: all training outcomes equal " + std::to_string(rate));
      }
      Eigen::VectorXd beta = fit_logistic_coefficients(design.x, t, spec, "outcome fit");
      auto model = make_model(data, spec.features, std::move(design), std::move(beta));
      return FittedPredictor([model](std::span<const double> x) { return sigmoid(model->linear(x)); },
                             spec.kind, rows.size());
    }
    default:
      throw DomainError("regression learner must be ridge, logistic, constant or oracle_injection, got " +
                        std::string(to_string(spec.kind)));
  }
}

FittedPredictor fit_outcome(const Dataset& data, std::span<const std::size_t> rows, int arm, const LearnerSpec& spec) {
  require_arm(arm);
  const auto sub = arm_rows(data, rows, arm);
  if (sub.empty()) throw DegenerateFitError("outcome fit: no training rows in arm " + std::to_string(arm));
  std::vector<double> ys;
  ys.reserve(sub.size());
  for (auto i : sub) ys.push_back(data.y(i));
  InjectionQuery q;
  q.arm = arm;
  return fit_regression(data, sub, ys, spec, q);
}

FittedPredictor fit_rho(const Dataset& data, std::span<const std::size_t> rows, int arm, const FittedPredictor& q_hat,
                        const SensitivityParams& params, Side side, const LearnerSpec& spec, RhoStrategy strategy) {
  require_arm(arm);
  const auto sub = arm_rows(data, rows, arm);
  if (sub.empty()) throw DegenerateFitError("rho fit: no training rows in arm " + std::to_string(arm));
  InjectionQuery query;
  query.arm = arm;
  query.side = side;
  query.lambda = params.lambda();
  if (spec.kind == LearnerKind::OracleInjection) {
    spec.validate();
    return injected_predictor(spec, query, sub.size());
  }

  std::vector<double> qs(sub.size());
  for (std::size_t k = 0; k < sub.size(); ++k) qs[k] = q_hat(data.x(sub[k]));

  if (strategy == RhoStrategy::Direct) {
    std::vector<double> targets(sub.size());
    for (std::size_t k = 0; k < sub.size(); ++k) targets[k] = transformed_outcome(data.y(sub[k]), qs[k], params, side);
    return fit_regression(data, sub, targets, spec, query);
  }

  std::vector<double> ys(sub.size());
  std::vector<double> tail(sub.size());
  for (std::size_t k = 0; k < sub.size(); ++k) {
    const double y = data.y(sub[k]);
    const double d = y - qs[k];
    ys[k] = y;
    tail[k] = qs[k] + params.tail_weight() * (side == Side::Upper ? std::max(d, 0.0) : std::min(d, 0.0));
  }
  auto mu_hat = fit_regression(data, sub, ys, spec, query);
  auto cvar_hat = fit_regression(data, sub, tail, spec, query);
  const double inv = 1.0 / params.lambda();
  return FittedPredictor(
      [mu_hat = std::move(mu_hat), cvar_hat = std::move(cvar_hat), inv](std::span<const double> x) {
        return inv * mu_hat(x) + (1.0 - inv) * cvar_hat(x);
      },
      spec.kind, sub.size());
}

BinaryNuisances binary_nuisances(double mu_hat, const SensitivityParams& params) {
  if (!(mu_hat >= 0.0 && mu_hat <= 1.0)) throw DomainError("binary nuisances require mu_hat in [0,1]");
  const double lam = params.lambda();
  const double tau = params.tau();
  BinaryNuisances b{};
  b.q_minus = mu_hat > tau ? 1.0 : 0.0;
  b.q_plus = mu_hat > 1.0 - tau ? 1.0 : 0.0;
  b.rho_minus = std::max(1.0 - lam + mu_hat * lam, mu_hat / lam);
  b.rho_plus = std::min(1.0 - 1.0 / lam + mu_hat / lam, mu_hat * lam);
  return b;
}

}  // namespace dvds
