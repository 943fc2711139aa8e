#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dvds {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scalar argument is outside its mathematical domain (Λ < 1, α ∉ (0,1), K > n, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input table or dataset violates a structural requirement.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A learner was asked to fit on rows that cannot identify it
/// (single treatment arm, empty arm subset, constant binary response).
class DegenerateFitError : public Error {
 public:
  using Error::Error;
};

/// Iterative fit hit its iteration cap. Carries the last iterate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last_iterate)
      : Error(what), last_iterate_(std::move(last_iterate)) {}

  const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

 private:
  std::vector<double> last_iterate_;
};

/// Monte Carlo harness failure (too many failed replications).
class HarnessError : public Error {
 public:
  using Error::Error;
};

}  // namespace dvds
