#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dvds/error.hpp"

namespace dvds {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Upper (+) or lower (−) bound.
enum class Side { Upper, Lower };

constexpr Side opposite(Side s) noexcept { return s == Side::Upper ? Side::Lower : Side::Upper; }
constexpr double side_sign(Side s) noexcept { return s == Side::Upper ? 1.0 : -1.0; }
std::string_view to_string(Side s) noexcept;

enum class Estimand { Mean1, Mean0, ATE, ATT };

std::string_view to_string(Estimand e) noexcept;
/// Accepts "mean1", "mean0", "ate", "att" (case-insensitive).
Estimand parse_estimand(std::string_view name);

enum class OutcomeKind { Continuous, Binary };

/// Marginal sensitivity model parameters. The tail level τ = Λ/(Λ+1) is
/// computed once at construction and never recomputed.
class SensitivityParams {
 public:
  /// Throws DomainError unless lambda is finite and ≥ 1.
  explicit SensitivityParams(double lambda);

  double lambda() const noexcept { return lambda_; }
  double tau() const noexcept { return tau_; }
  /// Likelihood-ratio cap 1/(1−τ), evaluated as Λ+1.
  double tail_weight() const noexcept { return lambda_ + 1.0; }

 private:
  double lambda_;
  double tau_;
};

SensitivityParams sensitivity_params(double lambda);

/// Validated observational sample (X, Z, Y). Immutable after construction.
class Dataset {
 public:
  /// Throws DataError on any invariant violation.
  Dataset(RowMatrix covariates, std::vector<std::uint8_t> treatment, std::vector<double> outcome,
          OutcomeKind kind, std::vector<std::string> covariate_names = {});

  std::size_t rows() const noexcept { return outcome_.size(); }
  std::size_t dims() const noexcept { return static_cast<std::size_t>(covariates_.cols()); }
  OutcomeKind outcome_kind() const noexcept { return kind_; }

  const RowMatrix& covariates() const noexcept { return covariates_; }
  std::span<const double> x(std::size_t i) const noexcept {
    return {covariates_.data() + i * dims(), dims()};
  }
  int z(std::size_t i) const noexcept { return treatment_[i]; }
  double y(std::size_t i) const noexcept { return outcome_[i]; }

  const std::vector<std::uint8_t>& treatment() const noexcept { return treatment_; }
  const std::vector<double>& outcome() const noexcept { return outcome_; }
  const std::vector<std::string>& covariate_names() const noexcept { return names_; }

  bool operator==(const Dataset& other) const;

 private:
  RowMatrix covariates_;
  std::vector<std::uint8_t> treatment_;
  std::vector<double> outcome_;
  OutcomeKind kind_;
  std::vector<std::string> names_;
};

/// Untyped table as read from a delimited file.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> cells;  // one inner vector per data row
};

/// Column roles. An empty `covariates` list means "every remaining column".
struct ColumnRoles {
  std::string treatment;
  std::string outcome;
  std::vector<std::string> covariates;
};

/// Converts a raw table into a Dataset. Rejects rather than imputes: missing or
/// non-finite cells, non-{0,1} treatment, and non-{0,1} binary outcomes are
/// reported with their (1-based) data row and column name.
Dataset validate_dataset(const RawTable& raw, const ColumnRoles& roles, OutcomeKind kind);

/// Per-row, per-arm nuisance evaluations η̂ = (ê, Q̂₊, Q̂₋, ρ̂₊, ρ̂₋), plus μ̂
/// when available (always for binary outcomes).
struct ArmNuisance {
  std::vector<double> q_plus, q_minus;
  std::vector<double> rho_plus, rho_minus;
  std::vector<double> mu;  // empty when not estimated

  const std::vector<double>& q(Side s) const { return s == Side::Upper ? q_plus : q_minus; }
  const std::vector<double>& rho(Side s) const { return s == Side::Upper ? rho_plus : rho_minus; }
  std::vector<double>& q(Side s) { return s == Side::Upper ? q_plus : q_minus; }
  std::vector<double>& rho(Side s) { return s == Side::Upper ? rho_plus : rho_minus; }
};

struct NuisanceRow {
  double e_hat;
  std::array<double, 2> q_plus, q_minus, rho_plus, rho_minus;  // indexed by arm

  double q(Side s, int arm) const { return s == Side::Upper ? q_plus[arm] : q_minus[arm]; }
  double rho(Side s, int arm) const { return s == Side::Upper ? rho_plus[arm] : rho_minus[arm]; }
};

class NuisanceSet {
 public:
  NuisanceSet() = default;
  explicit NuisanceSet(std::size_t n);

  std::size_t rows() const noexcept { return e_hat.size(); }
  bool has_mu() const noexcept { return arm[0].mu.size() == rows() && arm[1].mu.size() == rows(); }
  NuisanceRow row(std::size_t i) const;

  /// Throws DataError if ê leaves [ε, 1−ε] or, for binary outcomes, if the
  /// quantiles are not {0,1} or ρ̂, μ̂ leave [0,1].
  void validate(double epsilon, OutcomeKind kind) const;

  std::vector<double> e_hat;
  std::array<ArmNuisance, 2> arm;
};

}  // namespace dvds
