#pragma once

#include <stdexcept>
#include <string>

namespace potmde {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An improper integral that does not converge for the given parameters.
class DivergenceError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Malformed or inconsistent input data (files, panels, samples).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: singular matrices, non-finite results.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested combination has no supporting theory (e.g. CIs for 3-parameter fits).
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace potmde
