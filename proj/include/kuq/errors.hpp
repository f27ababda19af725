#pragma once

#include <stdexcept>
#include <string>

namespace kuq {

/// Caller broke a precondition (dimension mismatch, non-PSD covariance, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not deliver a result within tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point fell outside the region a model is valid on.
class DomainViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A requested moment order exceeds the configured cap.
class OrderCapError : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

/// Input data (files, scenarios, parameters) is malformed or inconsistent.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kuq
