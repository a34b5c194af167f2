#pragma once

#include <stdexcept>
#include <string>

namespace fleetcharge {

/// Broad failure classes. The CLI maps these onto distinct exit codes.
enum class ErrorCategory {
  kInvalidInput,      // bad parameters, malformed files, dimension mismatch
  kInfeasible,        // degenerate fleet, empty polytope, unmatchable target
  kNumericalFailure,  // an internal guarantee was violated
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct InvalidParameter : Error {
  explicit InvalidParameter(const std::string& what)
      : Error(ErrorCategory::kInvalidInput, "invalid parameter: " + what) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& what)
      : Error(ErrorCategory::kInvalidInput, "dimension mismatch: " + what) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& what)
      : Error(ErrorCategory::kInvalidInput, "parse error: " + what) {}
};

struct DegenerateInput : Error {
  explicit DegenerateInput(const std::string& what)
      : Error(ErrorCategory::kInfeasible, "degenerate input: " + what) {}
};

struct EmptyPolytope : Error {
  explicit EmptyPolytope(const std::string& what)
      : Error(ErrorCategory::kInfeasible, "empty polytope: " + what) {}
};

struct InfeasibleTarget : Error {
  explicit InfeasibleTarget(const std::string& what)
      : Error(ErrorCategory::kInfeasible, "infeasible target: " + what) {}
};

struct ZeroGain : Error {
  explicit ZeroGain(const std::string& what)
      : Error(ErrorCategory::kInfeasible, "zero surge gain: " + what) {}
};

struct InternalError : Error {
  explicit InternalError(const std::string& what)
      : Error(ErrorCategory::kNumericalFailure, "internal error: " + what) {}
};

/// Process exit status for a failure class.
inline int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kInvalidInput: return 1;
    case ErrorCategory::kInfeasible: return 2;
    case ErrorCategory::kNumericalFailure: return 3;
  }
  return 3;
}

/// Re-raise `e` with a stage prefix, keeping its category.
[[noreturn]] inline void rethrow_with_stage(const std::string& stage,
                                            const Error& e) {
  throw Error(e.category(), stage + ": " + e.what());
}

}  // namespace fleetcharge
