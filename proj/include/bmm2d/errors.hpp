#pragma once

#include <stdexcept>
#include <string>

namespace bmm2d {

/// Parameters or arguments outside the mathematical domain of an operation
/// (infeasible AR coefficients, non-positive scale, undersized grid).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Input data for which the estimator is not defined, e.g. a constant field
/// whose normal equations are singular.
class DegenerateInputError : public std::runtime_error {
 public:
  explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed file contents (CSV, PGM, JSON config).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bmm2d
