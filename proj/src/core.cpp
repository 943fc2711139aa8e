#include "dvds/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace dvds {

std::string_view to_string(Side s) noexcept { return s == Side::Upper ? "upper" : "lower"; }

std::string_view to_string(Estimand e) noexcept {
  switch (e) {
    case Estimand::Mean1: return "mean1";
    case Estimand::Mean0: return "mean0";
    case Estimand::ATE: return "ate";
    case Estimand::ATT: return "att";
  }
  return "unknown";
}

Estimand parse_estimand(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "mean1") return Estimand::Mean1;
  if (lower == "mean0") return Estimand::Mean0;
  if (lower == "ate") return Estimand::ATE;
  if (lower == "att") return Estimand::ATT;
  throw DomainError("unknown estimand '" + std::string(name) + "' (expected ate, att, mean1 or mean0)");
}

SensitivityParams::SensitivityParams(double lambda) : lambda_(lambda), tau_(0.0) {
  if (!std::isfinite(lambda) || lambda < 1.0) {
    std::ostringstream msg;
    msg << "sensitivity parameter lambda must be finite and >= 1, got " << lambda;
    throw DomainError(msg.str());
  }
  tau_ = lambda_ / (lambda_ + 1.0);
}

SensitivityParams sensitivity_params(double lambda) { return SensitivityParams(lambda); }

Dataset::Dataset(RowMatrix covariates, std::vector<std::uint8_t> treatment, std::vector<double> outcome,
                 OutcomeKind kind, std::vector<std::string> covariate_names)
    : covariates_(std::move(covariates)),
      treatment_(std::move(treatment)),
      outcome_(std::move(outcome)),
      kind_(kind),
      names_(std::move(covariate_names)) {
  const auto n = outcome_.size();
  if (n == 0) throw DataError("dataset must contain at least one row");
  if (treatment_.size() != n || static_cast<std::size_t>(covariates_.rows()) != n) {
    throw DataError("covariate, treatment and outcome row counts differ");
  }
  if (covariates_.cols() == 0) throw DataError("dataset needs at least one covariate column");
  if (names_.empty()) {
    for (Eigen::Index j = 0; j < covariates_.cols(); ++j) names_.push_back("x" + std::to_string(j + 1));
  }
  if (names_.size() != static_cast<std::size_t>(covariates_.cols())) {
    throw DataError("covariate name count does not match covariate columns");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (treatment_[i] > 1) {
      throw DataError("row " + std::to_string(i + 1) + ": treatment must be 0 or 1");
    }
    if (!std::isfinite(outcome_[i])) {
      throw DataError("row " + std::to_string(i + 1) + ": non-finite outcome");
    }
    if (kind_ == OutcomeKind::Binary && outcome_[i] != 0.0 && outcome_[i] != 1.0) {
      throw DataError("row " + std::to_string(i + 1) + ": binary outcome must be 0 or 1");
    }
  }
  if (!covariates_.allFinite()) throw DataError("covariates contain non-finite values");
}

bool Dataset::operator==(const Dataset& other) const {
  return kind_ == other.kind_ && names_ == other.names_ && treatment_ == other.treatment_ &&
         outcome_ == other.outcome_ && covariates_.rows() == other.covariates_.rows() &&
         covariates_.cols() == other.covariates_.cols() && covariates_ == other.covariates_;
}

namespace {

std::optional<double> parse_number(std::string_view cell) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace

Dataset validate_dataset(const RawTable& raw, const ColumnRoles& roles, OutcomeKind kind) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < raw.header.size(); ++j) {
    if (!index.emplace(raw.header[j], j).second) {
      throw DataError("duplicate column '" + raw.header[j] + "'");
    }
  }
  auto column = [&](const std::string& name, const char* role) {
    auto it = index.find(name);
    if (it == index.end()) throw DataError(std::string(role) + " column '" + name + "' not found");
    return it->second;
  };
  const std::size_t zcol = column(roles.treatment, "treatment");
  const std::size_t ycol = column(roles.outcome, "outcome");
  if (zcol == ycol) throw DataError("treatment and outcome must be different columns");

  std::vector<std::string> cov_names = roles.covariates;
  if (cov_names.empty()) {
    for (std::size_t j = 0; j < raw.header.size(); ++j) {
      if (j != zcol && j != ycol) cov_names.push_back(raw.header[j]);
    }
  }
  if (cov_names.empty()) throw DataError("at least one covariate column is required");
  std::vector<std::size_t> xcols;
  for (const auto& name : cov_names) {
    const auto j = column(name, "covariate");
    if (j == zcol || j == ycol) throw DataError("column '" + name + "' cannot be both covariate and treatment/outcome");
    xcols.push_back(j);
  }

  const std::size_t n = raw.cells.size();
  if (n == 0) throw DataError("table has no data rows");
  RowMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(xcols.size()));
  std::vector<std::uint8_t> z(n);
  std::vector<double> y(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = raw.cells[i];
    const std::string where = "row " + std::to_string(i + 1);
    if (row.size() != raw.header.size()) {
      throw DataError(where + ": expected " + std::to_string(raw.header.size()) + " cells, found " +
                      std::to_string(row.size()));
    }
    auto cell = [&](std::size_t j) {
      auto v = parse_number(row[j]);
      if (!v) throw DataError(where + ", column '" + raw.header[j] + "': missing or non-finite value '" + row[j] + "'");
      return *v;
    };
    const double zv = cell(zcol);
    if (zv != 0.0 && zv != 1.0) {
      throw DataError(where + ", column '" + raw.header[zcol] + "': treatment must be 0 or 1, got '" + row[zcol] + "'");
    }
    z[i] = static_cast<std::uint8_t>(zv);
    y[i] = cell(ycol);
    if (kind == OutcomeKind::Binary && y[i] != 0.0 && y[i] != 1.0) {
      throw DataError(where + ", column '" + raw.header[ycol] + "': binary outcome must be 0 or 1, got '" + row[ycol] + "'");
    }
    for (std::size_t k = 0; k < xcols.size(); ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = cell(xcols[k]);
    }
  }
  return Dataset(std::move(x), std::move(z), std::move(y), kind, std::move(cov_names));
}

NuisanceSet::NuisanceSet(std::size_t n) : e_hat(n) {
  for (auto& a : arm) {
    a.q_plus.assign(n, 0.0);
    a.q_minus.assign(n, 0.0);
    a.rho_plus.assign(n, 0.0);
    a.rho_minus.assign(n, 0.0);
  }
}

NuisanceRow NuisanceSet::row(std::size_t i) const {
  NuisanceRow r{};
  r.e_hat = e_hat[i];
  for (int a = 0; a < 2; ++a) {
    r.q_plus[a] = arm[a].q_plus[i];
    r.q_minus[a] = arm[a].q_minus[i];
    r.rho_plus[a] = arm[a].rho_plus[i];
    r.rho_minus[a] = arm[a].rho_minus[i];
  }
  return r;
}

void NuisanceSet::validate(double epsilon, OutcomeKind kind) const {
  const auto n = rows();
  for (const auto& a : arm) {
    if (a.q_plus.size() != n || a.q_minus.size() != n || a.rho_plus.size() != n || a.rho_minus.size() != n) {
      throw DataError("nuisance set has inconsistent row counts");
    }
    if (!a.mu.empty() && a.mu.size() != n) throw DataError("nuisance set has inconsistent mu row count");
  }
  if (kind == OutcomeKind::Binary && !has_mu()) throw DataError("binary outcomes require mu in the nuisance set");
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (std::size_t i = 0; i < n; ++i) {
    const double e = e_hat[i];
    if (!(e >= epsilon && e <= 1.0 - epsilon)) {
      throw DataError("row " + std::to_string(i + 1) + ": propensity outside [epsilon, 1 - epsilon]");
    }
    for (const auto& a : arm) {
      for (double v : {a.q_plus[i], a.q_minus[i], a.rho_plus[i], a.rho_minus[i]}) {
        if (!std::isfinite(v)) throw DataError("row " + std::to_string(i + 1) + ": non-finite nuisance value");
      }
      if (kind == OutcomeKind::Binary) {
        const bool ok = (a.q_plus[i] == 0.0 || a.q_plus[i] == 1.0) && (a.q_minus[i] == 0.0 || a.q_minus[i] == 1.0) &&
                        in01(a.rho_plus[i]) && in01(a.rho_minus[i]) && in01(a.mu[i]);
        if (!ok) throw DataError("row " + std::to_string(i + 1) + ": binary nuisance values out of range");
      }
    }
  }
}

}  // namespace dvds
