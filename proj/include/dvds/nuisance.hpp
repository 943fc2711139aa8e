#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "dvds/core.hpp"

namespace dvds {

enum class LearnerKind { Logistic, Ridge, PinballLinear, Constant, OracleInjection };
enum class FeatureExpansion { Raw, RawPlusPairwise };
/// How ρ̂± is learned for continuous outcomes: one regression of the full
/// transformed outcome, or separate μ̂ and CVaR-part regressions.
enum class RhoStrategy { Direct, Separate };

std::string_view to_string(LearnerKind k) noexcept;
std::string_view to_string(FeatureExpansion f) noexcept;
std::string_view to_string(RhoStrategy s) noexcept;
LearnerKind parse_learner_kind(std::string_view name);
FeatureExpansion parse_feature_expansion(std::string_view name);
RhoStrategy parse_rho_strategy(std::string_view name);

/// What an injected nuisance is being asked for.
struct InjectionQuery {
  int arm = 1;            // treatment arm (ignored for propensity)
  Side side = Side::Upper;  // which bound (quantile and ρ only)
  double alpha = 0.5;     // quantile level (quantile only)
  double lambda = 1.0;    // Λ (ρ only)
};

using InjectedFunction = std::function<double(std::span<const double> x, const InjectionQuery& query)>;

struct LearnerSpec {
  LearnerKind kind = LearnerKind::Constant;
  double regularization = 1e-4;  // L2 penalty on standardized slopes; intercept unpenalized
  int max_iterations = 100;
  double tolerance = 1e-8;
  FeatureExpansion features = FeatureExpansion::RawPlusPairwise;
  /// Required for OracleInjection, ignored otherwise.
  std::shared_ptr<const InjectedFunction> injected;

  /// Throws DomainError on regularization < 0, max_iterations < 1,
  /// tolerance ≤ 0, or an injection spec without a function.
  void validate() const;

  static LearnerSpec logistic(double regularization = 1e-4);
  static LearnerSpec ridge(double regularization = 1e-4);
  static LearnerSpec pinball(double regularization = 0.0, int max_iterations = 3000);
  static LearnerSpec constant();
  static LearnerSpec injection(InjectedFunction fn);
};

/// Immutable fitted nuisance x ↦ prediction.
class FittedPredictor {
 public:
  using Function = std::function<double(std::span<const double>)>;

  FittedPredictor(Function fn, LearnerKind kind, std::size_t training_rows)
      : fn_(std::move(fn)), kind_(kind), training_rows_(training_rows) {}

  double operator()(std::span<const double> x) const { return fn_(x); }
  LearnerKind kind() const noexcept { return kind_; }
  std::size_t training_rows() const noexcept { return training_rows_; }

 private:
  Function fn_;
  LearnerKind kind_;
  std::size_t training_rows_;
};

/// Propensity P(Z=1|X). Built-in logistic is penalized and fit by damped
/// Newton steps; constant returns the mean treatment rate.
/// Errors: DegenerateFitError when rows hold a single treatment value,
/// ConvergenceError when Newton does not converge in max_iterations.
FittedPredictor fit_propensity(const Dataset& data, std::span<const std::size_t> rows, const LearnerSpec& spec);

/// min(max(value, ε), 1−ε). Requires ε ∈ (0, 0.5).
double clip_propensity(double value, double epsilon);

/// Conditional α-quantile of Y in arm `arm`, trained on the arm's rows among `rows`.
FittedPredictor fit_quantile(const Dataset& data, std::span<const std::size_t> rows, int arm, double alpha,
                             const LearnerSpec& spec);

/// Regression of arbitrary per-row targets (targets[k] belongs to rows[k]).
FittedPredictor fit_regression(const Dataset& data, std::span<const std::size_t> rows,
                               std::span<const double> targets, const LearnerSpec& spec,
                               const InjectionQuery& query = {});

/// Outcome regression μ̂(·, arm). Logistic requires binary outcomes.
FittedPredictor fit_outcome(const Dataset& data, std::span<const std::size_t> rows, int arm, const LearnerSpec& spec);

/// Transformed-outcome regression ϱ̂±(·, arm; q̂). At Λ = 1 the Separate
/// strategy returns the μ̂ regression exactly.
FittedPredictor fit_rho(const Dataset& data, std::span<const std::size_t> rows, int arm, const FittedPredictor& q_hat,
                        const SensitivityParams& params, Side side, const LearnerSpec& spec, RhoStrategy strategy);

struct BinaryNuisances {
  double q_plus, q_minus, rho_plus, rho_minus;
};

/// Closed-form quantiles and adversarial regressions of a Bernoulli(μ̂) outcome.
BinaryNuisances binary_nuisances(double mu_hat, const SensitivityParams& params);

/// Features used by the linear learners. Exposed for tests.
std::size_t expanded_dimension(std::size_t d, FeatureExpansion expansion) noexcept;
void expand_features(std::span<const double> x, FeatureExpansion expansion, std::span<double> out) noexcept;

}  // namespace dvds
