#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfpa {

// Numeric values are part of the C API contract (see mfpa.h).
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kConfig = 2,
  kSimulationBlowup = 3,
  kCheckFailed = 4,
  kNumericDomain = 5,
  kAmbiguousMaximizer = 6,
  kContractEvaluation = 7,
  kInsufficientData = 8,
  kIo = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class NumericDomainError : public Error {
 public:
  explicit NumericDomainError(const std::string& what) : Error(ErrorCode::kNumericDomain, what) {}
};

class AmbiguousMaximizerError : public Error {
 public:
  explicit AmbiguousMaximizerError(const std::string& what)
      : Error(ErrorCode::kAmbiguousMaximizer, what) {}
};

class SimulationBlowupError : public Error {
 public:
  SimulationBlowupError(std::size_t step, const std::string& what)
      : Error(ErrorCode::kSimulationBlowup, what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class ContractEvaluationError : public Error {
 public:
  explicit ContractEvaluationError(const std::string& what)
      : Error(ErrorCode::kContractEvaluation, what) {}
};

class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& what)
      : Error(ErrorCode::kInsufficientData, what) {}
};

/// Configuration problem; `field` is a dotted path such as "mc.master_seed".
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(ErrorCode::kConfig, field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace mfpa
