#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dvds/core.hpp"
#include "dvds/estimator.hpp"
#include "dvds/oracle.hpp"

namespace dvds {

/// Simulation designs. The two benchmark designs share
///   X ~ Uniform([−1,1]⁵),  Z | X ~ Bernoulli(1/(1 + exp(X₁ + 0.5·1{X₂>0} + 0.5·X₂X₃)))
/// and differ in the outcome law (which never depends on Z):
///   binary:      Y | X ~ Bernoulli(1/(1 + exp(0.5X₁ + X₂ + 0.25X₂X₃)))
///   continuous:  Y | X ~ Normal(2·sign(X₁) + X₂ + X₂X₃, sd = 1 + X₄²)
enum class GenerativeKind { PaperBinary, PaperContinuous, CustomDiscrete };

std::string_view to_string(GenerativeKind kind) noexcept;
/// "paper_binary" or "paper_continuous".
GenerativeKind parse_generative_kind(std::string_view name);

struct GenerativeSpec {
  GenerativeKind kind = GenerativeKind::PaperBinary;
  std::optional<DiscreteDGP> custom;  // required for CustomDiscrete

  OutcomeKind outcome_kind() const noexcept;
};

/// Seeded draws from the design. Columns x1..x5 for the benchmark designs,
/// a single "level" column for custom discrete designs.
Dataset simulate(const GenerativeSpec& spec, std::size_t n, std::uint64_t seed);

namespace paper {

double propensity(std::span<const double> x) noexcept;
double binary_mean(std::span<const double> x) noexcept;
double continuous_mean(std::span<const double> x) noexcept;
double continuous_sd(std::span<const double> x) noexcept;

}  // namespace paper

/// Sharp identified intervals for every estimand.
struct SharpBounds {
  Interval mean1, mean0, ate, att;
  const Interval& get(Estimand e) const noexcept;
};

/// True sharp bounds: tensor-product Gauss–Legendre quadrature over the
/// covariate cube for the benchmark designs (panels split at every
/// discontinuity and kink of the integrand), the greedy oracle for custom
/// discrete designs.
SharpBounds true_sharp_bounds(const GenerativeSpec& spec, const SensitivityParams& params);

/// Learners that return the exact nuisance functions of a benchmark design.
LearnerBundle oracle_learners(GenerativeKind kind);

struct CoverageConfig {
  GenerativeSpec spec;
  std::vector<double> lambdas{1.0};
  std::size_t reps = 100;
  std::size_t n = 1000;
  LearnerBundle learners;
  std::size_t folds = 5;
  double alpha = 0.05;  // two-sided; each side uses α/2
  double epsilon = 0.01;
  Estimand estimand = Estimand::ATE;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct ReplicationRecord {
  std::size_t rep = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t fold_seed = 0;
  double lambda = 1.0;
  bool failed = false;
  std::string error;
  double psi_lower = 0.0, psi_upper = 0.0;
  double se_lower = 0.0, se_upper = 0.0;
  double ci_lower = 0.0, ci_upper = 0.0;
  bool covered = false;
};

struct CoverageEntry {
  double lambda = 1.0;
  Estimand estimand = Estimand::ATE;
  std::size_t replications = 0;  // configured
  std::size_t failures = 0;
  double truth_lower = 0.0, truth_upper = 0.0;
  double bias_lower = 0.0, bias_upper = 0.0;
  double coverage = 0.0;  // over successful replications
  double mean_width = 0.0;
};

struct CoverageReport {
  std::uint64_t seed = 0;
  std::vector<CoverageEntry> entries;        // one per Λ, in grid order
  std::vector<ReplicationRecord> records;    // rep-major, Λ-minor
};

/// Replications draw data and folds from seeds derived from (seed, rep), so
/// each can be reproduced alone. Failures are recorded per replication;
/// more than 1% failed replications raises HarnessError.
CoverageReport monte_carlo_coverage(const CoverageConfig& config);

}  // namespace dvds
