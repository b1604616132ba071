#pragma once

#include <stdexcept>
#include <string>

namespace vaelab {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation (e.g. log of a non-positive value).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a precondition of the API.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Linear algebra failure (non-PSD covariance, singular matrix).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Input data failed validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// File or dataset could not be ingested.
class IngestionError : public Error {
 public:
  using Error::Error;
};

class IdxBadMagicError : public IngestionError {
 public:
  using IngestionError::IngestionError;
};

class IdxTruncatedError : public IngestionError {
 public:
  using IngestionError::IngestionError;
};

class IdxCountMismatchError : public IngestionError {
 public:
  using IngestionError::IngestionError;
};

class IdxDimensionError : public IngestionError {
 public:
  using IngestionError::IngestionError;
};

/// A trained model missed a required quality threshold.
class QualityError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace vaelab
