#include "dvds/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "dvds/error.hpp"

namespace dvds {

using ojson = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    const auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    out.emplace_back(trim(field));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

int as_int(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer()) throw DataError("learner config: '" + key + "' must be an integer");
  return v.get<int>();
}

double as_number(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw DataError("learner config: '" + key + "' must be a number");
  return v.get<double>();
}

std::string as_string(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) throw DataError("learner config: '" + key + "' must be a string");
  return v.get<std::string>();
}

LearnerSpec parse_learner(const nlohmann::json& obj, const std::string& role, LearnerSpec spec) {
  if (!obj.is_object()) throw DataError("learner config: '" + role + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string key = role + "." + it.key();
    try {
      if (it.key() == "kind") {
        spec.kind = parse_learner_kind(as_string(*it, key));
        if (spec.kind == LearnerKind::OracleInjection) {
          throw DataError("learner config: '" + key + "': oracle_injection is only available through the library");
        }
      } else if (it.key() == "regularization") {
        spec.regularization = as_number(*it, key);
      } else if (it.key() == "max_iterations") {
        spec.max_iterations = as_int(*it, key);
      } else if (it.key() == "tolerance") {
        spec.tolerance = as_number(*it, key);
      } else if (it.key() == "features") {
        spec.features = parse_feature_expansion(as_string(*it, key));
      } else {
        throw DataError("learner config: unknown key '" + key + "'");
      }
    } catch (const DomainError& e) {
      throw DataError("learner config: '" + key + "': " + e.what());
    }
  }
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw DataError("learner config: '" + role + "': " + e.what());
  }
  return spec;
}

std::string render(const ojson& j) { return j.dump(2) + "\n"; }

}  // namespace

RawTable parse_csv(std::string_view text) {
  RawTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) {
      if (pos > text.size()) break;
      continue;
    }
    auto fields = split_fields(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() != table.header.size()) {
        throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                        " fields, found " + std::to_string(fields.size()));
      }
      table.cells.push_back(std::move(fields));
    }
    if (pos > text.size()) break;
  }
  if (!have_header) throw DataError("CSV input is empty (a header row is required)");
  return table;
}

RawTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_csv(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  for (const auto& name : data.covariate_names()) out += name + ",";
  out += "z,y\n";
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (double v : data.x(i)) {
      out += format_double(v);
      out += ',';
    }
    out += data.z(i) ? "1," : "0,";
    out += format_double(data.y(i));
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw Error("cannot rename output into '" + path.string() + "': " + ec.message());
  }
}

LearnerBundle parse_learner_config(const nlohmann::json& config) {
  if (!config.is_object()) throw DataError("learner config must be a JSON object");
  LearnerBundle b;
  for (auto it = config.begin(); it != config.end(); ++it) {
    const auto& key = it.key();
    if (key == "propensity") {
      b.propensity = parse_learner(*it, key, b.propensity);
    } else if (key == "quantile") {
      b.quantile = parse_learner(*it, key, b.quantile);
    } else if (key == "regression") {
      b.regression = parse_learner(*it, key, b.regression);
    } else if (key == "binary_outcome") {
      b.binary_outcome = parse_learner(*it, key, b.binary_outcome);
    } else if (key == "strategy") {
      try {
        b.strategy = parse_rho_strategy(as_string(*it, key));
      } catch (const DomainError& e) {
        throw DataError(std::string("learner config: 'strategy': ") + e.what());
      }
    } else {
      throw DataError("learner config: unknown key '" + key + "'");
    }
  }
  return b;
}

LearnerBundle read_learner_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open learner config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("learner config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_learner_config(j);
}

std::string analysis_json(Estimand estimand, const std::vector<AnalysisRecord>& records) {
  ojson j;
  j["version"] = kReportVersion;
  j["estimand"] = to_string(estimand);
  j["records"] = ojson::array();
  for (const auto& r : records) {
    ojson o;
    o["lambda"] = r.lambda;
    o["psi_lower"] = r.psi_lower;
    o["psi_upper"] = r.psi_upper;
    o["se_lower"] = r.se_lower;
    o["se_upper"] = r.se_upper;
    o["ci_lower"] = r.ci_lower;
    o["ci_upper"] = r.ci_upper;
    o["n"] = r.n;
    o["K"] = r.folds;
    o["seed"] = r.seed;
    j["records"].push_back(std::move(o));
  }
  return render(j);
}

std::string analysis_csv(const std::vector<AnalysisRecord>& records) {
  std::string out = "# " + std::string(kReportVersion) + "\n";
  out += "lambda,psi_lower,psi_upper,se_lower,se_upper,ci_lower,ci_upper,n,K,seed\n";
  for (const auto& r : records) {
    for (double v : {r.lambda, r.psi_lower, r.psi_upper, r.se_lower, r.se_upper, r.ci_lower, r.ci_upper}) {
      out += format_double(v);
      out += ',';
    }
    out += std::to_string(r.n) + "," + std::to_string(r.folds) + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

std::string coverage_json(const CoverageConfig& config, const CoverageReport& report) {
  ojson j;
  j["version"] = kReportVersion;
  j["design"] = to_string(config.spec.kind);
  j["estimand"] = to_string(config.estimand);
  j["seed"] = report.seed;
  j["reps"] = config.reps;
  j["n"] = config.n;
  j["K"] = config.folds;
  j["alpha"] = config.alpha;
  j["entries"] = ojson::array();
  for (const auto& e : report.entries) {
    ojson o;
    o["lambda"] = e.lambda;
    o["replications"] = e.replications;
    o["failures"] = e.failures;
    o["truth_lower"] = e.truth_lower;
    o["truth_upper"] = e.truth_upper;
    o["bias_lower"] = e.bias_lower;
    o["bias_upper"] = e.bias_upper;
    o["coverage"] = e.coverage;
    o["mean_width"] = e.mean_width;
    j["entries"].push_back(std::move(o));
  }
  return render(j);
}

std::string coverage_records_csv(const CoverageReport& report) {
  std::string out = "# " + std::string(kReportVersion) + "\n";
  out += "rep,lambda,data_seed,fold_seed,failed,psi_lower,psi_upper,se_lower,se_upper,ci_lower,ci_upper,covered\n";
  for (const auto& r : report.records) {
    out += std::to_string(r.rep) + "," + format_double(r.lambda) + "," + std::to_string(r.data_seed) + "," +
           std::to_string(r.fold_seed) + "," + (r.failed ? "1" : "0");
    for (double v : {r.psi_lower, r.psi_upper, r.se_lower, r.se_upper, r.ci_lower, r.ci_upper}) {
      out += ',';
      out += format_double(v);
    }
    out += r.covered ? ",1\n" : ",0\n";
  }
  return out;
}

}  // namespace dvds
