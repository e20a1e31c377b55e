#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bsdelab {

// Bad user input: malformed config, invalid parameter ranges, missing tracks.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Bad data encountered at run time (non-finite coefficient, precondition
// violated on a concrete path). Carries the offending location when known.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical scheme failure: implicit step stuck, singular regression.
class SchemeError : public std::runtime_error {
 public:
  explicit SchemeError(const std::string& what) : std::runtime_error(what) {}
};

// Picard iteration stopped making progress; keeps the distance history so
// the caller can dump it.
class SolverDivergence : public SchemeError {
 public:
  SolverDivergence(const std::string& what, std::vector<double> history)
      : SchemeError(what), picard_history(std::move(history)) {}
  std::vector<double> picard_history;
};

}  // namespace bsdelab
