#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dvds/core.hpp"
#include "dvds/estimator.hpp"
#include "dvds/io.hpp"

namespace dvds {

struct AnalysisConfig {
  std::filesystem::path data;
  ColumnRoles roles;
  OutcomeKind outcome_kind = OutcomeKind::Continuous;
  Estimand estimand = Estimand::ATE;
  std::vector<double> lambdas{1.0};
  std::size_t folds = 5;
  double epsilon = 0.01;
  double alpha = 0.05;  // two-sided
  LearnerBundle learners;
  std::uint64_t seed = 0;
  std::filesystem::path out;  // empty: standard output
  std::string format = "json";
  unsigned threads = 1;
};

/// Sorted ascending and deduplicated; throws DomainError on Λ < 1 or an
/// empty list.
std::vector<double> normalize_lambdas(std::vector<double> lambdas);

/// "start:stop:step", stop included when it lies on the grid (up to 1e-9 steps).
std::vector<double> parse_lambda_grid(std::string_view grid);

/// Cross-fits once per seed-derived fold plan and returns one record per Λ.
std::vector<AnalysisRecord> analyze(const Dataset& data, const AnalysisConfig& config);

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitRuntime = 3;

/// Entry point of the `dvds` tool: subcommands analyze, simulate, coverage.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dvds
