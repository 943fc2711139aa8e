#include "dvds/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include <CLI11.hpp>

#include "dvds/error.hpp"
#include "dvds/simulation.hpp"

namespace dvds {

std::vector<double> normalize_lambdas(std::vector<double> lambdas) {
  if (lambdas.empty()) throw DomainError("at least one lambda is required");
  for (double l : lambdas) {
    if (!std::isfinite(l) || l < 1.0) throw DomainError("lambda must be a finite value >= 1, got " + format_double(l));
  }
  std::sort(lambdas.begin(), lambdas.end());
  lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
  return lambdas;
}

namespace {

double parse_real(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DomainError("invalid " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::vector<double> parse_lambda_grid(std::string_view grid) {
  const auto a = grid.find(':');
  const auto b = a == std::string_view::npos ? a : grid.find(':', a + 1);
  if (b == std::string_view::npos || grid.find(':', b + 1) != std::string_view::npos) {
    throw DomainError("lambda grid must look like start:stop:step, got '" + std::string(grid) + "'");
  }
  const double start = parse_real(grid.substr(0, a), "grid start");
  const double stop = parse_real(grid.substr(a + 1, b - a - 1), "grid stop");
  const double step = parse_real(grid.substr(b + 1), "grid step");
  if (!(step > 0.0) || !std::isfinite(step)) throw DomainError("lambda grid step must be positive");
  if (!(stop >= start)) throw DomainError("lambda grid stop must be >= start");
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  if (count > 100000) throw DomainError("lambda grid has too many points");
  std::vector<double> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

std::vector<AnalysisRecord> analyze(const Dataset& data, const AnalysisConfig& config) {
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  const auto lambdas = normalize_lambdas(config.lambdas);
  std::vector<SensitivityParams> grid;
  for (double l : lambdas) grid.emplace_back(l);

  const FoldPlan plan = split_folds(data.rows(), config.folds, config.seed);
  const auto sets = crossfit_nuisances_grid(data, grid, config.learners, plan, config.epsilon, config.threads);

  std::vector<AnalysisRecord> records;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto est = estimate_bounds(data, sets[j], grid[j], config.estimand);
    const auto ci = wald_bounds(est, config.alpha / 2.0);
    AnalysisRecord r;
    r.lambda = lambdas[j];
    r.psi_lower = est.psi_lower;
    r.psi_upper = est.psi_upper;
    r.se_lower = est.se_lower;
    r.se_upper = est.se_upper;
    r.ci_lower = ci.lower;
    r.ci_upper = ci.upper;
    r.n = data.rows();
    r.folds = config.folds;
    r.seed = config.seed;
    records.push_back(r);
  }
  return records;
}

namespace {

// Raised for problems with the invocation or its inputs (exit 2).
struct InputError : Error {
  using Error::Error;
};

void emit(const std::filesystem::path& path, const std::string& content, std::ostream& out) {
  if (path.empty()) {
    out << content;
  } else {
    write_file_atomic(path, content);
  }
}

struct LambdaOptions {
  std::vector<double> values;
  std::string grid;

  void add(CLI::App* cmd) {
    auto* single = cmd->add_option("--lambda", values, "Sensitivity parameter (repeatable)")->take_all();
    auto* g = cmd->add_option("--lambda-grid", grid, "Grid start:stop:step");
    single->excludes(g);
  }

  std::vector<double> resolve() const {
    std::vector<double> all = values;
    if (!grid.empty()) {
      const auto g = parse_lambda_grid(grid);
      all.insert(all.end(), g.begin(), g.end());
    }
    if (all.empty()) all.push_back(1.0);
    return normalize_lambdas(std::move(all));
  }
};

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

// Converts every library error raised while reading inputs into InputError.
template <typename F>
auto input_stage(F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    throw InputError(e.what());
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sensitivity bounds on treatment effects under the marginal sensitivity model", "dvds"};
  app.require_subcommand(1);

  // analyze
  auto* an = app.add_subcommand("analyze", "Estimate bounds for a CSV dataset");
  std::string data_path, outcome, treatment, covariates = "rest", estimand = "ate", learner_config, out_path;
  std::string format = "json";
  bool binary = false, continuous = false;
  std::size_t folds = 5;
  double epsilon = 0.01, alpha = 0.05;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  LambdaOptions an_lambda;
  an->add_option("--data", data_path, "Input CSV")->required();
  an->add_option("--outcome", outcome, "Outcome column")->required();
  an->add_option("--treatment", treatment, "Treatment column (0/1)")->required();
  an->add_option("--covariates", covariates, "Comma-separated covariate columns, or 'rest'");
  auto* bin = an->add_flag("--binary", binary, "Binary (0/1) outcome");
  auto* cont = an->add_flag("--continuous", continuous, "Real-valued outcome (default)");
  bin->excludes(cont);
  an->add_option("--estimand", estimand, "ate, att, mean1 or mean0");
  an_lambda.add(an);
  an->add_option("--folds", folds, "Cross-fitting folds K");
  an->add_option("--epsilon", epsilon, "Propensity clip");
  an->add_option("--alpha", alpha, "Two-sided level");
  an->add_option("--seed", seed, "Fold seed")->required();
  an->add_option("--learner-config", learner_config, "JSON learner configuration");
  an->add_option("--out", out_path, "Output file (default: stdout)");
  an->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  an->add_option("--threads", threads, "Worker cap");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw a dataset from a benchmark design");
  std::string sim_spec, sim_out;
  std::size_t sim_n = 0;
  std::uint64_t sim_seed = 0;
  sim->add_option("--spec", sim_spec, "paper_binary or paper_continuous")->required();
  sim->add_option("--n", sim_n, "Rows")->required();
  sim->add_option("--seed", sim_seed, "Seed")->required();
  sim->add_option("--out", sim_out, "Output CSV (default: stdout)");

  // coverage
  auto* cov = app.add_subcommand("coverage", "Monte Carlo coverage of the Wald bounds");
  std::string cov_spec, cov_out, cov_records, cov_estimand = "ate", cov_learners;
  std::size_t cov_reps = 100, cov_n = 1000, cov_folds = 5;
  double cov_alpha = 0.05, cov_eps = 0.01;
  std::uint64_t cov_seed = 0;
  unsigned cov_threads = 1;
  LambdaOptions cov_lambda;
  cov->add_option("--spec", cov_spec, "paper_binary or paper_continuous")->required();
  cov->add_option("--reps", cov_reps, "Replications");
  cov->add_option("--n", cov_n, "Rows per replication");
  cov_lambda.add(cov);
  cov->add_option("--estimand", cov_estimand, "ate, att, mean1 or mean0");
  cov->add_option("--folds", cov_folds, "Cross-fitting folds K");
  cov->add_option("--alpha", cov_alpha, "Two-sided level");
  cov->add_option("--epsilon", cov_eps, "Propensity clip");
  cov->add_option("--seed", cov_seed, "Master seed")->required();
  cov->add_option("--learner-config", cov_learners, "JSON learner configuration");
  cov->add_option("--out", cov_out, "JSON report (default: stdout)");
  cov->add_option("--records", cov_records, "Per-replication CSV");
  cov->add_option("--threads", cov_threads, "Worker cap");

  std::vector<const char*> argv;
  argv.push_back("dvds");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  if (an->parsed()) {
    return guarded(err, [&] {
      AnalysisConfig config;
      const Dataset data = input_stage([&] {
        config.data = data_path;
        config.roles.outcome = outcome;
        config.roles.treatment = treatment;
        if (covariates != "rest") {
          std::string_view rest = covariates;
          while (true) {
            const auto c = rest.find(',');
            config.roles.covariates.emplace_back(rest.substr(0, c));
            if (c == std::string_view::npos) break;
            rest.remove_prefix(c + 1);
          }
        }
        config.outcome_kind = binary ? OutcomeKind::Binary : OutcomeKind::Continuous;
        config.estimand = parse_estimand(estimand);
        config.lambdas = an_lambda.resolve();
        config.folds = folds;
        config.epsilon = epsilon;
        config.alpha = alpha;
        if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("--alpha must lie in (0,1)");
        if (!(epsilon > 0.0 && epsilon < 0.5)) throw DomainError("--epsilon must lie in (0,0.5)");
        if (folds < 2) throw DomainError("--folds must be >= 2");
        if (!learner_config.empty()) config.learners = read_learner_config(learner_config);
        config.seed = seed;
        config.out = out_path;
        config.format = format;
        config.threads = threads == 0 ? 1 : threads;
        auto d = validate_dataset(read_csv(config.data), config.roles, config.outcome_kind);
        if (config.folds > d.rows()) throw DomainError("--folds exceeds the number of rows");
        return d;
      });
      const auto records = analyze(data, config);
      emit(config.out, config.format == "csv" ? analysis_csv(records) : analysis_json(config.estimand, records), out);
      return kExitOk;
    });
  }

  if (sim->parsed()) {
    return guarded(err, [&] {
      GenerativeSpec spec;
      input_stage([&] {
        spec.kind = parse_generative_kind(sim_spec);
        if (sim_n == 0) throw DomainError("--n must be >= 1");
        return 0;
      });
      emit(sim_out, dataset_to_csv(simulate(spec, sim_n, sim_seed)), out);
      return kExitOk;
    });
  }

  return guarded(err, [&] {
    CoverageConfig config;
    input_stage([&] {
      config.spec.kind = parse_generative_kind(cov_spec);
      if (cov_reps == 0) throw DomainError("--reps must be >= 1");
      if (cov_n < 2) throw DomainError("--n must be >= 2");
      if (cov_folds < 2 || cov_folds > cov_n) throw DomainError("--folds must satisfy 2 <= K <= n");
      if (!(cov_alpha > 0.0 && cov_alpha < 1.0)) throw DomainError("--alpha must lie in (0,1)");
      if (!(cov_eps > 0.0 && cov_eps < 0.5)) throw DomainError("--epsilon must lie in (0,0.5)");
      config.lambdas = cov_lambda.resolve();
      config.reps = cov_reps;
      config.n = cov_n;
      config.folds = cov_folds;
      config.alpha = cov_alpha;
      config.epsilon = cov_eps;
      config.estimand = parse_estimand(cov_estimand);
      config.seed = cov_seed;
      config.threads = cov_threads == 0 ? 1 : cov_threads;
      if (!cov_learners.empty()) config.learners = read_learner_config(cov_learners);
      return 0;
    });
    const auto report = monte_carlo_coverage(config);
    const std::string json = coverage_json(config, report);
    const std::string csv = coverage_records_csv(report);
    if (!cov_records.empty()) write_file_atomic(cov_records, csv);
    emit(cov_out, json, out);
    return kExitOk;
  });
}

}  // namespace dvds
