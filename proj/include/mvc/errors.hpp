#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mvc {

// Error taxonomy shared by every module. Callers that only care about
// "something went wrong" can catch mvc::Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where finite values are required, or a domain violation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

// A node was used with a tape it does not belong to.
class GraphError : public Error {
 public:
  using Error::Error;
};

// Invalid sizes or hyperparameters (K < 2, K > n, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data violates a structural requirement (class too small, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// The finite-difference oracle detected a non-deterministic loss.
class OracleError : public Error {
 public:
  using Error::Error;
};

// Malformed MVDS / MVCK file. Carries the byte offset of the failure.
class FormatError : public Error {
 public:
  FormatError(std::uint64_t offset, const std::string& what)
      : Error("format error at byte " + std::to_string(offset) + ": " + what),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Training produced a non-finite objective. The last finite epoch (or -1 if
// none) is kept so the caller can report it.
class NumericAbort : public Error {
 public:
  NumericAbort(int last_finite_epoch, const std::string& what)
      : Error(what), last_finite_epoch_(last_finite_epoch) {}

  int last_finite_epoch() const noexcept { return last_finite_epoch_; }

 private:
  int last_finite_epoch_;
};

}  // namespace mvc
