// Copyright 2026 The hmoments Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hmoments {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operands disagree on qubit count or matrix shape.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class ContractViolation : public Error {
public:
  using Error::Error;
};

/// The request exceeds a configured size cap (dense matrices, moment orders).
class ResourceError : public Error {
public:
  using Error::Error;
};

/// Input lies outside the domain where a closed form is defined.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Readout calibration matrix is singular or too ill-conditioned to invert.
class CalibrationError : public Error {
public:
  CalibrationError(const std::string &what, double condition_number)
      : Error(what), condition_number_(condition_number) {}
  double condition_number() const noexcept { return condition_number_; }

private:
  double condition_number_;
};

/// A moment table is too short for the requested estimator order.
class InsufficientOrderError : public ContractViolation {
public:
  InsufficientOrderError(const std::string &who, int required, int available)
      : ContractViolation(who + ": need order >= " + std::to_string(required) +
                          ", moment table stops at " +
                          std::to_string(available)),
        required_(required) {}
  int required() const noexcept { return required_; }

private:
  int required_;
};

/// A Pauli expectation needed by a contraction was never measured.
class CoverageError : public Error {
public:
  CoverageError(const std::string &what, std::vector<std::string> missing)
      : Error(what), missing_(std::move(missing)) {}
  const std::vector<std::string> &missing() const noexcept { return missing_; }

private:
  std::vector<std::string> missing_;
};

/// Base for failures of the moment-based energy estimators.
class EstimatorError : public Error {
public:
  using Error::Error;
};

/// Every direction of the Krylov overlap matrix fell below the drop tolerance.
class DegenerateSubspaceError : public EstimatorError {
public:
  using EstimatorError::EstimatorError;
};

class CmxSingularityError : public EstimatorError {
public:
  using EstimatorError::EstimatorError;
};

/// The PDS Hankel system stayed singular after regularization.
class PdsDegeneracyError : public EstimatorError {
public:
  using EstimatorError::EstimatorError;
};

/// Truncated imaginary-time norm vanished or went negative.
class IteNormalizationError : public EstimatorError {
public:
  using EstimatorError::EstimatorError;
};

} // namespace hmoments
