#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dvds/core.hpp"
#include "dvds/estimator.hpp"
#include "dvds/simulation.hpp"

namespace dvds {

/// Embedded in every report so readers can reject unknown layouts.
inline constexpr std::string_view kReportVersion = "dvds-report/1";

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

/// Comma-separated text with a header row. Fields are trimmed of spaces and a
/// trailing '\r'; quoting is not supported. Blank lines are skipped.
/// Throws DataError on an empty input or a ragged row (1-based line number).
RawTable parse_csv(std::string_view text);
RawTable read_csv(const std::filesystem::path& path);

/// Covariate columns followed by z and y.
std::string dataset_to_csv(const Dataset& data);

/// Writes to a sibling temporary file and renames it into place, so readers
/// never observe a partial file. Throws Error on I/O failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Learner configuration. Every key is optional; absent keys keep the
/// LearnerBundle defaults:
///   { "propensity": {...}, "quantile": {...}, "regression": {...},
///     "binary_outcome": {...}, "strategy": "separate" | "direct" }
/// with each learner object
///   { "kind": "logistic" | "ridge" | "pinball_linear" | "constant",
///     "regularization": r, "max_iterations": m, "tolerance": t,
///     "features": "raw" | "raw_plus_pairwise_interactions" }
/// Unknown keys are rejected with DataError.
LearnerBundle parse_learner_config(const nlohmann::json& config);
LearnerBundle read_learner_config(const std::filesystem::path& path);

/// One row of an analysis report.
struct AnalysisRecord {
  double lambda = 1.0;
  double psi_lower = 0.0, psi_upper = 0.0;
  double se_lower = 0.0, se_upper = 0.0;
  double ci_lower = 0.0, ci_upper = 0.0;
  std::size_t n = 0;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
};

/// {"version", "estimand", "records": [{lambda, psi_lower, psi_upper,
/// se_lower, se_upper, ci_lower, ci_upper, n, K, seed}, ...]}
std::string analysis_json(Estimand estimand, const std::vector<AnalysisRecord>& records);
/// First line "# dvds-report/1", then a header and one line per record.
std::string analysis_csv(const std::vector<AnalysisRecord>& records);

/// {"version", "design", "estimand", "seed", "reps", "n", "K", "alpha",
///  "entries": [{lambda, replications, failures, truth_lower, truth_upper,
///  bias_lower, bias_upper, coverage, mean_width}, ...]}
std::string coverage_json(const CoverageConfig& config, const CoverageReport& report);
/// Flat per-replication table for external plotting.
std::string coverage_records_csv(const CoverageReport& report);

}  // namespace dvds
